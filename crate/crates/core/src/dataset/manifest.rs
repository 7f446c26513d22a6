use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DatasetError, Layout, RefBox};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedPage {
    /// Image location, relative to the manifest file.
    pub image_path: PathBuf,
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub boxes: Vec<RefBox>,
    pub layout: Layout,
}

impl AnnotatedPage {
    /// Key used to associate detections with this page: the image path with
    /// forward slashes.
    pub fn page_id(&self) -> String {
        self.image_path.to_string_lossy().replace('\\', "/")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    #[serde(default)]
    pub train: Vec<AnnotatedPage>,
    #[serde(default)]
    pub validation: Vec<AnnotatedPage>,
    #[serde(default)]
    pub test: Vec<AnnotatedPage>,
}

impl Splits {
    pub fn get(&self, split: Split) -> &[AnnotatedPage] {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }

    pub fn get_mut(&mut self, split: Split) -> &mut Vec<AnnotatedPage> {
        match split {
            Split::Train => &mut self.train,
            Split::Validation => &mut self.validation,
            Split::Test => &mut self.test,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Split, &AnnotatedPage)> {
        Split::ALL
            .into_iter()
            .flat_map(move |s| self.get(s).iter().map(move |p| (s, p)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    #[serde(default)]
    pub splits: Splits,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationIssue {
    pub split: Split,
    pub page: String,
    pub box_index: Option<usize>,
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.split, self.page)?;
        if let Some(i) = self.box_index {
            write!(f, " box #{i}")?;
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for issue in &self.issues {
            writeln!(f, "  - {issue}")?;
        }
        Ok(())
    }
}

impl DatasetManifest {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            splits: Splits::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, DatasetError> {
        serde_json::from_str(text).map_err(|e| DatasetError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    /// Checks box geometry, split disjointness and, when `image_root` is
    /// given, that every image file exists beneath it.
    pub fn validate(&self, image_root: Option<&Path>) -> ValidationReport {
        let mut issues = Vec::new();
        let mut seen: HashMap<String, Split> = HashMap::new();
        for (split, page) in self.splits.iter() {
            let id = page.page_id();
            let issue = |box_index, message: String| ValidationIssue {
                split,
                page: id.clone(),
                box_index,
                message,
            };
            if let Some(first) = seen.insert(id.clone(), split) {
                issues.push(issue(
                    None,
                    if first == split {
                        format!("listed more than once in {split}")
                    } else {
                        format!("also listed in {first}; splits must be disjoint")
                    },
                ));
            }
            if page.width == 0 || page.height == 0 {
                issues.push(issue(None, "page has zero width or height".into()));
            }
            for (i, b) in page.boxes.iter().enumerate() {
                if b.is_empty() {
                    issues.push(issue(Some(i), format!("box {b} has zero width or height")));
                } else if !b.fits_within(page.width, page.height) {
                    issues.push(issue(
                        Some(i),
                        format!("box {b} exceeds page bounds {}x{}", page.width, page.height),
                    ));
                }
            }
            if let Some(root) = image_root {
                if !root.join(&page.image_path).is_file() {
                    issues.push(issue(None, "image file not found".into()));
                }
            }
        }
        ValidationReport { issues }
    }

    pub fn page_count(&self) -> usize {
        self.splits.iter().count()
    }

    /// Ground-truth boxes keyed by page id.
    pub fn ground_truth(&self) -> BTreeMap<String, Vec<RefBox>> {
        self.splits
            .iter()
            .map(|(_, p)| (p.page_id(), p.boxes.clone()))
            .collect()
    }
}

/// Loads and fully validates a manifest; image paths resolve relative to the
/// manifest's directory.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let manifest = DatasetManifest::from_json(&text)?;
    let root = path.parent().unwrap_or(Path::new("."));
    let report = manifest.validate(Some(root));
    if report.is_ok() {
        Ok(manifest)
    } else {
        Err(DatasetError::Validation(report))
    }
}

pub fn save_manifest(manifest: &DatasetManifest, path: &Path) -> Result<(), DatasetError> {
    std::fs::write(path, manifest.to_json()).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Imports an `image,x,y,w,h` CSV dump (header row optional). Page sizes are
/// read from the image files under `image_root`; every page gets `layout`.
pub fn import_csv(
    csv_path: &Path,
    image_root: &Path,
    layout: Layout,
) -> Result<Vec<AnnotatedPage>, DatasetError> {
    let io_err = |source| DatasetError::Io {
        path: csv_path.display().to_string(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(csv_path)
        .map_err(|e| DatasetError::Parse(e.to_string()))?;

    let mut pages: Vec<AnnotatedPage> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| DatasetError::Parse(e.to_string()))?;
        if line == 0 && record.get(0).is_some_and(|f| f.eq_ignore_ascii_case("image")) {
            continue;
        }
        if record.len() != 5 {
            return Err(DatasetError::Parse(format!(
                "line {}: expected 5 fields (image,x,y,w,h), got {}",
                line + 1,
                record.len()
            )));
        }
        let num = |i: usize| {
            record[i].parse::<u32>().map_err(|e| {
                DatasetError::Parse(format!("line {}: field {}: {e}", line + 1, i + 1))
            })
        };
        let b = RefBox::new(num(1)?, num(2)?, num(3)?, num(4)?);
        let image = record[0].to_string();
        let slot = match index.get(&image) {
            Some(&i) => i,
            None => {
                let (width, height) = image::image_dimensions(image_root.join(&image))
                    .map_err(|e| match e {
                        image::ImageError::IoError(source) => io_err(source),
                        other => DatasetError::Parse(format!("{image}: {other}")),
                    })?;
                pages.push(AnnotatedPage {
                    image_path: PathBuf::from(&image),
                    width,
                    height,
                    boxes: Vec::new(),
                    layout,
                });
                index.insert(image, pages.len() - 1);
                pages.len() - 1
            }
        };
        pages[slot].boxes.push(b);
    }
    Ok(pages)
}
