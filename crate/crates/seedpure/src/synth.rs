//! Synthetic seed-image datasets written as PPM directories.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use seedpure_core::imaging::gen_synthetic;
use seedpure_core::SynthSpec;

use crate::config::derive_seed;
use crate::error::{Error, Result};
use crate::formats::ppm::write_image;

pub const DEFAULT_FREQUENCY: f64 = 0.05;
pub const DEFAULT_NOISE: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthClass {
    pub name: String,
    pub color: [u8; 3],
    #[serde(default = "default_frequency")]
    pub texture_frequency: f64,
    #[serde(default = "default_noise")]
    pub noise_std: f64,
}

fn default_frequency() -> f64 {
    DEFAULT_FREQUENCY
}

fn default_noise() -> f64 {
    DEFAULT_NOISE
}

/// Two classes with clearly different base colours.
pub fn default_classes() -> Vec<SynthClass> {
    vec![
        SynthClass {
            name: "variety_a".into(),
            color: [180, 160, 120],
            texture_frequency: DEFAULT_FREQUENCY,
            noise_std: DEFAULT_NOISE,
        },
        SynthClass {
            name: "variety_b".into(),
            color: [120, 160, 180],
            texture_frequency: DEFAULT_FREQUENCY,
            noise_std: DEFAULT_NOISE,
        },
    ]
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    class: Vec<SynthClass>,
}

/// Parses a TOML list of `[[class]]` tables.
pub fn parse_spec(text: &str) -> Result<Vec<SynthClass>> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::config("spec", e.message().trim()))?;
    let spec: SpecFile =
        serde_path_to_error::deserialize(de).map_err(|e| Error::config(e.path().to_string(), e.into_inner().message().trim()))?;
    if spec.class.is_empty() {
        return Err(Error::config("class", "at least one class is required"));
    }
    for (i, c) in spec.class.iter().enumerate() {
        let valid_name = !c.name.is_empty() && c.name.chars().all(|ch| ch.is_ascii_alphanumeric() || "_-.".contains(ch));
        if !valid_name || c.name.starts_with('.') {
            return Err(Error::config(format!("class[{i}].name"), "use letters, digits, `_`, `-` or `.`"));
        }
        if spec.class[..i].iter().any(|o| o.name == c.name) {
            return Err(Error::config(format!("class[{i}].name"), format!("duplicate class `{}`", c.name)));
        }
        if !(c.texture_frequency >= 0.0 && c.texture_frequency.is_finite()) {
            return Err(Error::config(format!("class[{i}].texture_frequency"), "must be finite and non-negative"));
        }
        if !(c.noise_std >= 0.0 && c.noise_std.is_finite()) {
            return Err(Error::config(format!("class[{i}].noise_std"), "must be finite and non-negative"));
        }
    }
    Ok(spec.class)
}

pub fn load_spec(path: &Path) -> Result<Vec<SynthClass>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_spec(&text)
}

/// Writes `out_dir/<class>/<class>_<i>.ppm` for each class, `per_class`
/// images each. Image `i` of a class is seeded from `(seed, class, i)` alone.
pub fn generate(
    out_dir: &Path,
    classes: &[SynthClass],
    per_class: usize,
    seed: u64,
    height: usize,
    width: usize,
) -> Result<Vec<PathBuf>> {
    let mut dirs = Vec::with_capacity(classes.len());
    for (id, class) in classes.iter().enumerate() {
        let dir = out_dir.join(&class.name);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for i in 0..per_class {
            let spec = SynthSpec {
                class_id: u8::try_from(id).unwrap_or(u8::MAX),
                base_color: class.color,
                texture_frequency: class.texture_frequency,
                noise_std: class.noise_std,
                seed: derive_seed(seed, &format!("synth/{}/{i}", class.name)),
            };
            let img = gen_synthetic(&spec, height, width)?;
            write_image(&img, dir.join(format!("{}_{i:04}.ppm", class.name)))?;
        }
        dirs.push(dir);
    }
    Ok(dirs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let classes = default_classes();
        generate(a.path(), &classes, 3, 5, 20, 30).unwrap();
        generate(b.path(), &classes, 3, 5, 20, 30).unwrap();
        for c in &classes {
            for i in 0..3 {
                let rel = Path::new(&c.name).join(format!("{}_{i:04}.ppm", c.name));
                assert_eq!(fs::read(a.path().join(&rel)).unwrap(), fs::read(b.path().join(&rel)).unwrap());
            }
        }
        assert_eq!(fs::read_dir(a.path().join("variety_a")).unwrap().count(), 3);
    }

    #[test]
    fn spec_parsing() {
        let classes = parse_spec(
            r#"
[[class]]
name = "red"
color = [200, 40, 40]
[[class]]
name = "green"
color = [40, 200, 40]
noise_std = 0.1
"#,
        )
        .unwrap();
        assert_eq!(classes.len(), 2);
        assert_eq!(classes[0].texture_frequency, DEFAULT_FREQUENCY);
        assert_eq!(classes[1].noise_std, 0.1);
        assert!(parse_spec("[[class]]\nname = \"../x\"\ncolor = [1, 2, 3]\n").is_err());
        assert!(parse_spec("[[class]]\nname = \"x\"\ncolor = [1, 2]\n").is_err());
        assert!(parse_spec("class = []\n").is_err());
    }
}
