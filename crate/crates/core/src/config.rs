//! Flat `key=value` configuration files and their mapping onto experiment
//! configs.
//!
//! Blank lines and lines starting with `#` are ignored. Keys may appear at
//! most once per file; unknown keys are rejected.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experiments::inverse::InverseConfig;
use crate::experiments::lyapunov::LyapunovConfig;
use crate::experiments::oscillator::OscillatorConfig;
use crate::experiments::robust::{ImageSource, RobustConfig};
use crate::experiments::swissroll::{Architecture, SwissRollConfig};
use crate::experiments::verify::VerifyConfig;

/// Parses `key=value` lines in file order.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("config line {}: expected key=value", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::Parse(format!("config line {}: empty key", i + 1)));
        }
        if out.iter().any(|(seen, _)| seen == k) {
            return Err(Error::Parse(format!("config line {}: duplicate key {k:?}", i + 1)));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

pub fn read_key_values(path: &Path) -> Result<Vec<(String, String)>> {
    parse_key_values(&std::fs::read_to_string(path)?)
}

/// A config whose fields can be listed and set by name.
pub trait Configurable {
    /// Every field with its current value, in a stable order.
    fn entries(&self) -> Vec<(&'static str, String)>;

    fn set(&mut self, key: &str, value: &str) -> Result<()>;

    fn apply(&mut self, pairs: &[(String, String)]) -> Result<()> {
        for (k, v) in pairs {
            self.set(k, v)?;
        }
        Ok(())
    }

    fn to_text(&self) -> String {
        self.entries().iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

/// Scalar-like values stored in configs.
pub trait ConfigValue: Sized {
    fn render(&self) -> String;
    fn parse_value(s: &str) -> Option<Self>;
}

macro_rules! from_str_value {
    ($($t:ty),*) => {
        $(impl ConfigValue for $t {
            fn render(&self) -> String {
                format!("{self:?}")
            }
            fn parse_value(s: &str) -> Option<Self> {
                s.parse().ok()
            }
        })*
    };
}

from_str_value!(f64, usize, u64);

impl ConfigValue for Vec<f64> {
    fn render(&self) -> String {
        self.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
    }
    fn parse_value(s: &str) -> Option<Self> {
        s.split(',').map(|t| t.trim().parse().ok()).collect()
    }
}

impl ConfigValue for [f64; 4] {
    fn render(&self) -> String {
        self.to_vec().render()
    }
    fn parse_value(s: &str) -> Option<Self> {
        Vec::<f64>::parse_value(s)?.try_into().ok()
    }
}

impl ConfigValue for Architecture {
    fn render(&self) -> String {
        self.name().to_string()
    }
    fn parse_value(s: &str) -> Option<Self> {
        Architecture::parse(s).ok()
    }
}

impl ConfigValue for PathBuf {
    fn render(&self) -> String {
        self.display().to_string()
    }
    fn parse_value(s: &str) -> Option<Self> {
        Some(PathBuf::from(s))
    }
}

fn parse_field<T: ConfigValue>(key: &str, value: &str) -> Result<T> {
    T::parse_value(value).ok_or_else(|| Error::Parse(format!("bad value {value:?} for {key}")))
}

fn unknown(key: &str) -> Error {
    Error::Parse(format!("unknown config key {key:?}"))
}

macro_rules! impl_configurable {
    ($ty:ty { $($field:ident),* $(,)? }) => {
        impl Configurable for $ty {
            fn entries(&self) -> Vec<(&'static str, String)> {
                vec![$((stringify!($field), self.$field.render())),*]
            }

            fn set(&mut self, key: &str, value: &str) -> Result<()> {
                match key {
                    $(stringify!($field) => self.$field = parse_field(key, value)?,)*
                    _ => return Err(unknown(key)),
                }
                Ok(())
            }
        }
    };
}

impl_configurable!(OscillatorConfig { h, steps, x0, p0 });

impl_configurable!(SwissRollConfig {
    arch, layers, epochs, n_train, n_test, noise, width, total_time, lr, batch_size, seed, grid,
    probe_every,
});

impl_configurable!(InverseConfig {
    epsilon, noise_sigma, n_train, n_test, iterations, lr, n_blocks, lift_dim, grid_points,
    tau_min, tau_max, seed,
});

impl_configurable!(LyapunovConfig {
    target, mu, epsilon, hidden, potential_terms, n_trajectories, samples_per_trajectory, horizon,
    start_box, iterations, lr, n_check, check_steps, check_h, seed,
});

impl_configurable!(VerifyConfig { pairs, range, n_certificates, seed });

const IDX_KEYS: [&str; 5] = ["train_images", "train_labels", "test_images", "test_labels", "pool"];
const SYNTHETIC_KEYS: [&str; 3] = ["synthetic_side", "synthetic_classes", "synthetic_noise"];

impl Configurable for RobustConfig {
    fn entries(&self) -> Vec<(&'static str, String)> {
        let mut out = match &self.source {
            ImageSource::Idx { train_images, train_labels, test_images, test_labels, pool } => vec![
                ("source", "idx".to_string()),
                ("train_images", train_images.render()),
                ("train_labels", train_labels.render()),
                ("test_images", test_images.render()),
                ("test_labels", test_labels.render()),
                ("pool", pool.render()),
            ],
            ImageSource::Synthetic { side, n_classes, noise } => vec![
                ("source", "synthetic".to_string()),
                ("synthetic_side", side.render()),
                ("synthetic_classes", n_classes.render()),
                ("synthetic_noise", noise.render()),
            ],
        };
        out.extend([
            ("n_train", self.n_train.render()),
            ("n_test", self.n_test.render()),
            ("epochs", self.epochs.render()),
            ("batch_size", self.batch_size.render()),
            ("lr_min", self.lr_min.render()),
            ("lr_peak", self.lr_peak.render()),
            ("weight_decay", self.weight_decay.render()),
            ("margin_offset", self.margin_offset.render()),
            ("n_blocks", self.n_blocks.render()),
            ("hidden", self.hidden.render()),
            ("total_time", self.total_time.render()),
            ("resnet_h", self.resnet_h.render()),
            ("attack_iters", self.attack_iters.render()),
            ("epsilons", self.epsilons.render()),
            ("seed", self.seed.render()),
        ]);
        out
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if key == "source" {
            self.source = match value {
                "idx" => ImageSource::Idx {
                    train_images: PathBuf::new(),
                    train_labels: PathBuf::new(),
                    test_images: PathBuf::new(),
                    test_labels: PathBuf::new(),
                    pool: 2,
                },
                "synthetic" => ImageSource::Synthetic { side: 14, n_classes: 10, noise: 0.3 },
                other => return Err(Error::Parse(format!("unknown image source {other:?}"))),
            };
            return Ok(());
        }
        if IDX_KEYS.contains(&key) {
            if !matches!(self.source, ImageSource::Idx { .. }) {
                self.set("source", "idx")?;
            }
            let ImageSource::Idx { train_images, train_labels, test_images, test_labels, pool } =
                &mut self.source
            else {
                unreachable!()
            };
            match key {
                "train_images" => *train_images = parse_field(key, value)?,
                "train_labels" => *train_labels = parse_field(key, value)?,
                "test_images" => *test_images = parse_field(key, value)?,
                "test_labels" => *test_labels = parse_field(key, value)?,
                _ => *pool = parse_field(key, value)?,
            }
            return Ok(());
        }
        if SYNTHETIC_KEYS.contains(&key) {
            if !matches!(self.source, ImageSource::Synthetic { .. }) {
                self.set("source", "synthetic")?;
            }
            let ImageSource::Synthetic { side, n_classes, noise } = &mut self.source else {
                unreachable!()
            };
            match key {
                "synthetic_side" => *side = parse_field(key, value)?,
                "synthetic_classes" => *n_classes = parse_field(key, value)?,
                _ => *noise = parse_field(key, value)?,
            }
            return Ok(());
        }
        match key {
            "n_train" => self.n_train = parse_field(key, value)?,
            "n_test" => self.n_test = parse_field(key, value)?,
            "epochs" => self.epochs = parse_field(key, value)?,
            "batch_size" => self.batch_size = parse_field(key, value)?,
            "lr_min" => self.lr_min = parse_field(key, value)?,
            "lr_peak" => self.lr_peak = parse_field(key, value)?,
            "weight_decay" => self.weight_decay = parse_field(key, value)?,
            "margin_offset" => self.margin_offset = parse_field(key, value)?,
            "n_blocks" => self.n_blocks = parse_field(key, value)?,
            "hidden" => self.hidden = parse_field(key, value)?,
            "total_time" => self.total_time = parse_field(key, value)?,
            "resnet_h" => self.resnet_h = parse_field(key, value)?,
            "attack_iters" => self.attack_iters = parse_field(key, value)?,
            "epsilons" => self.epsilons = parse_field(key, value)?,
            "seed" => self.seed = parse_field(key, value)?,
            _ => return Err(unknown(key)),
        }
        Ok(())
    }
}
