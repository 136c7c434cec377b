//! Benchmark manifest: the real-image corpus, the sketches, and the renders
//! each method produced from each sketch.
//!
//! ```json
//! {
//!   "_comment": "keys starting with an underscore are ignored",
//!   "real_images": ["real/0001.png", "real/0002.png"],
//!   "real_features_file": "real_inception.csv",
//!   "sketches": [{ "id": "s01", "image": "sketches/s01.png" }],
//!   "methods": [{
//!     "name": "munit",
//!     "render_groups": [{ "sketch_id": "s01", "images": ["munit/s01_0.png"] }],
//!     "embeddings_file": "munit_content.csv",
//!     "features_file": "munit_inception.csv"
//!   }]
//! }
//! ```
//!
//! Relative paths resolve against the manifest's directory. In embedding and
//! feature files a sketch is identified by its `id` and the `k`-th render of
//! a group by `<sketch_id>/<k>` (zero-based).

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SketchEntry {
    pub id: String,
    pub image: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderGroup {
    pub sketch_id: String,
    pub images: Vec<PathBuf>,
}

impl RenderGroup {
    /// Identifier of the `k`-th render in embedding and feature files.
    pub fn render_id(&self, k: usize) -> String {
        render_id(&self.sketch_id, k)
    }
}

pub fn render_id(sketch_id: &str, k: usize) -> String {
    format!("{sketch_id}/{k}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodEntry {
    pub name: String,
    pub render_groups: Vec<RenderGroup>,
    pub embeddings_file: Option<PathBuf>,
    pub features_file: Option<PathBuf>,
}

impl MethodEntry {
    pub fn render_count(&self) -> usize {
        self.render_groups.iter().map(|g| g.images.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub real_images: Vec<PathBuf>,
    pub real_features_file: Option<PathBuf>,
    pub sketches: Vec<SketchEntry>,
    pub methods: Vec<MethodEntry>,
}

impl Manifest {
    pub fn sketch(&self, id: &str) -> Option<&SketchEntry> {
        self.sketches.iter().find(|s| s.id == id)
    }

    fn all_files(&self) -> impl Iterator<Item = &PathBuf> {
        self.real_images
            .iter()
            .chain(&self.real_features_file)
            .chain(self.sketches.iter().map(|s| &s.image))
            .chain(self.methods.iter().flat_map(|m| {
                m.render_groups
                    .iter()
                    .flat_map(|g| g.images.iter())
                    .chain(&m.embeddings_file)
                    .chain(&m.features_file)
            }))
    }
}

fn format_err(pointer: &str, msg: impl std::fmt::Display) -> Error {
    let pointer = if pointer.is_empty() { "/" } else { pointer };
    Error::Format(format!("manifest {pointer}: {msg}"))
}

struct Fields<'a> {
    map: &'a Map<String, Value>,
    pointer: String,
}

impl<'a> Fields<'a> {
    fn new(value: &'a Value, pointer: &str, allowed: &[&str]) -> Result<Self> {
        let map = value
            .as_object()
            .ok_or_else(|| format_err(pointer, "expected an object"))?;
        for key in map.keys() {
            if !key.starts_with('_') && !allowed.contains(&key.as_str()) {
                return Err(format_err(&format!("{pointer}/{key}"), "unknown field"));
            }
        }
        Ok(Fields {
            map,
            pointer: pointer.to_string(),
        })
    }

    fn ptr(&self, key: &str) -> String {
        format!("{}/{key}", self.pointer)
    }

    fn required(&self, key: &str) -> Result<&'a Value> {
        self.map
            .get(key)
            .ok_or_else(|| format_err(&self.ptr(key), "missing required field"))
    }

    fn string(&self, key: &str) -> Result<String> {
        match self.required(key)? {
            Value::String(s) if !s.is_empty() => Ok(s.clone()),
            _ => Err(format_err(&self.ptr(key), "expected a non-empty string")),
        }
    }

    fn optional_string(&self, key: &str) -> Result<Option<String>> {
        match self.map.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) if !s.is_empty() => Ok(Some(s.clone())),
            Some(_) => Err(format_err(&self.ptr(key), "expected a string or null")),
        }
    }

    fn array(&self, key: &str) -> Result<&'a Vec<Value>> {
        self.required(key)?
            .as_array()
            .ok_or_else(|| format_err(&self.ptr(key), "expected an array"))
    }

    fn string_array(&self, key: &str) -> Result<Vec<String>> {
        self.array(key)?
            .iter()
            .enumerate()
            .map(|(i, v)| match v {
                Value::String(s) if !s.is_empty() => Ok(s.clone()),
                _ => Err(format_err(
                    &format!("{}/{i}", self.ptr(key)),
                    "expected a non-empty string",
                )),
            })
            .collect()
    }
}

/// Validates the manifest structure and resolves relative paths against
/// `root`. Does not touch the filesystem.
pub fn parse_manifest(value: &Value, root: &Path) -> Result<Manifest> {
    let resolve = |p: String| -> PathBuf {
        let p = PathBuf::from(p);
        if p.is_absolute() {
            p
        } else {
            root.join(p)
        }
    };
    let top = Fields::new(
        value,
        "",
        &["real_images", "real_features_file", "sketches", "methods"],
    )?;
    let real_images = match top.map.get("real_images") {
        None => Vec::new(),
        Some(_) => top.string_array("real_images")?,
    }
    .into_iter()
    .map(resolve)
    .collect();
    let real_features_file = top.optional_string("real_features_file")?.map(resolve);

    let mut sketches = Vec::new();
    let mut sketch_ids = HashSet::new();
    for (i, s) in top.array("sketches")?.iter().enumerate() {
        let f = Fields::new(s, &format!("/sketches/{i}"), &["id", "image"])?;
        let id = f.string("id")?;
        if !sketch_ids.insert(id.clone()) {
            return Err(format_err(
                &f.ptr("id"),
                format!("duplicate sketch id '{id}'"),
            ));
        }
        sketches.push(SketchEntry {
            id,
            image: resolve(f.string("image")?),
        });
    }

    let mut methods = Vec::new();
    let mut names = HashSet::new();
    for (i, m) in top.array("methods")?.iter().enumerate() {
        let mp = format!("/methods/{i}");
        let f = Fields::new(
            m,
            &mp,
            &["name", "render_groups", "embeddings_file", "features_file"],
        )?;
        let name = f.string("name")?;
        if !names.insert(name.clone()) {
            return Err(format_err(
                &f.ptr("name"),
                format!("duplicate method name '{name}'"),
            ));
        }
        let groups = f.array("render_groups")?;
        if groups.is_empty() {
            return Err(format_err(
                &f.ptr("render_groups"),
                "method has no render groups",
            ));
        }
        let mut render_groups = Vec::new();
        let mut seen = HashSet::new();
        for (j, g) in groups.iter().enumerate() {
            let gf = Fields::new(
                g,
                &format!("{mp}/render_groups/{j}"),
                &["sketch_id", "images"],
            )?;
            let sketch_id = gf.string("sketch_id")?;
            if !sketch_ids.contains(&sketch_id) {
                return Err(Error::Reference(format!(
                    "manifest {}: method '{name}' references unknown sketch id '{sketch_id}'",
                    gf.ptr("sketch_id")
                )));
            }
            if !seen.insert(sketch_id.clone()) {
                return Err(format_err(
                    &gf.ptr("sketch_id"),
                    format!("sketch '{sketch_id}' has more than one render group"),
                ));
            }
            let images = gf.string_array("images")?;
            if images.is_empty() {
                return Err(format_err(&gf.ptr("images"), "render group has no images"));
            }
            render_groups.push(RenderGroup {
                sketch_id,
                images: images.into_iter().map(resolve).collect(),
            });
        }
        methods.push(MethodEntry {
            name,
            render_groups,
            embeddings_file: f.optional_string("embeddings_file")?.map(resolve),
            features_file: f.optional_string("features_file")?.map(resolve),
        });
    }

    Ok(Manifest {
        real_images,
        real_features_file,
        sketches,
        methods,
    })
}

/// Reads, validates and resolves a manifest file, then checks that every
/// referenced file exists.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::input(path, e))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: invalid JSON: {e}", path.display())))?;
    let root = path.parent().unwrap_or_else(|| Path::new("."));
    let manifest = parse_manifest(&value, root)?;
    let missing: Vec<PathBuf> = manifest
        .all_files()
        .filter(|p| !p.is_file())
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingFiles(missing));
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn minimal() -> Value {
        json!({
            "real_images": ["r0.png", "r1.png"],
            "sketches": [{"id": "s1", "image": "s1.png"}],
            "methods": [{
                "name": "m",
                "render_groups": [{"sketch_id": "s1", "images": ["a.png", "b.png"]}]
            }]
        })
    }

    #[test]
    fn parses_minimal_manifest() {
        let m = parse_manifest(&minimal(), Path::new("/data")).unwrap();
        assert_eq!(m.real_images.len(), 2);
        assert_eq!(m.sketches.len(), 1);
        assert_eq!(m.methods[0].render_count(), 2);
        assert_eq!(m.sketches[0].image, PathBuf::from("/data/s1.png"));
        assert_eq!(m.methods[0].render_groups[0].render_id(1), "s1/1");
    }

    #[test]
    fn unknown_sketch_is_reference_error() {
        let mut v = minimal();
        v["methods"][0]["render_groups"][0]["sketch_id"] = json!("nope");
        let err = parse_manifest(&v, Path::new(".")).unwrap_err();
        assert!(
            matches!(&err, Error::Reference(m) if m.contains("'nope'")),
            "{err}"
        );
    }

    #[test]
    fn duplicate_method_names() {
        let mut v = minimal();
        let m = v["methods"][0].clone();
        v["methods"].as_array_mut().unwrap().push(m);
        let err = parse_manifest(&v, Path::new(".")).unwrap_err();
        assert!(
            matches!(&err, Error::Format(m) if m.contains("/methods/1/name")),
            "{err}"
        );
    }

    #[test]
    fn schema_errors_carry_pointer() {
        let mut v = minimal();
        v["sketches"][0]["image"] = json!(3);
        let err = parse_manifest(&v, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("/sketches/0/image"), "{err}");

        let mut v = minimal();
        v["methods"][0]["colour"] = json!("red");
        let err = parse_manifest(&v, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("/methods/0/colour"), "{err}");

        let mut v = minimal();
        v["_note"] = json!("ignored");
        assert!(parse_manifest(&v, Path::new(".")).is_ok());
    }

    #[test]
    fn missing_files_are_all_listed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        std::fs::write(&path, minimal().to_string()).unwrap();
        match load_manifest(&path).unwrap_err() {
            Error::MissingFiles(files) => assert_eq!(files.len(), 5),
            other => panic!("unexpected {other}"),
        }
    }
}
