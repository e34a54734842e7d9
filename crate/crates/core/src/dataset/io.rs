use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{MaskMatrix, MultiViewDataset};
use crate::error::{ClimError, Result};
use crate::numkit::Matrix;

/// On-disk dataset description. Paths are resolved relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub views: Vec<ManifestView>,
    pub labels: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestView {
    pub name: String,
    pub path: String,
    /// Optional 0/1 observation mask with the same shape as the view.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
}

pub fn load_manifest(path: &Path) -> Result<MultiViewDataset> {
    load_manifest_with_masks(path).map(|(ds, _)| ds)
}

/// Loads the dataset and, when every view lists a mask file, its masks.
pub fn load_manifest_with_masks(path: &Path) -> Result<(MultiViewDataset, Option<MaskMatrix>)> {
    let text = fs::read_to_string(path).map_err(|e| ClimError::io(path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| ClimError::parse(path, e.to_string()))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let resolve = |p: &str| -> PathBuf { base.join(p) };

    let mut views = Vec::with_capacity(manifest.views.len());
    let mut names = Vec::with_capacity(manifest.views.len());
    for v in &manifest.views {
        views.push(read_matrix_csv(&resolve(&v.path))?);
        names.push(v.name.clone());
    }
    let labels = match &manifest.labels {
        Some(p) => Some(read_labels_csv(&resolve(p))?),
        None => None,
    };
    let ds = MultiViewDataset::new(views, labels, names)?;

    let masks = if manifest.views.iter().all(|v| v.mask.is_some()) && !manifest.views.is_empty() {
        let m = manifest
            .views
            .iter()
            .map(|v| read_mask_csv(&resolve(v.mask.as_deref().unwrap())))
            .collect::<Result<Vec<_>>>()?;
        let masks = MaskMatrix::new(m);
        masks.check_shapes(&ds)?;
        Some(masks)
    } else {
        None
    };
    Ok((ds, masks))
}

/// Writes views, optional masks and labels as CSV plus `manifest.json` into `dir`.
pub fn save_dataset(
    ds: &MultiViewDataset,
    masks: Option<&MaskMatrix>,
    dir: &Path,
) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| ClimError::io(dir, e))?;
    let mut views = Vec::new();
    for (v, x) in ds.views().iter().enumerate() {
        let file = format!("view_{v}.csv");
        write_matrix_csv(&dir.join(&file), x)?;
        let mask = match masks {
            Some(m) => {
                let mf = format!("mask_{v}.csv");
                write_mask_csv(&dir.join(&mf), m.view(v))?;
                Some(mf)
            }
            None => None,
        };
        views.push(ManifestView {
            name: ds.view_names()[v].clone(),
            path: file,
            mask,
        });
    }
    let labels = match ds.labels() {
        Some(l) => {
            write_labels_csv(&dir.join("labels.csv"), l)?;
            Some("labels.csv".to_string())
        }
        None => None,
    };
    let manifest = Manifest { views, labels };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| ClimError::io(&path, e))?;
    Ok(path)
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| ClimError::parse(path, e.to_string()))
}

fn read_rows<T>(path: &Path, parse: impl Fn(&str) -> Option<T>) -> Result<Vec<Vec<T>>> {
    let mut rows = Vec::new();
    for (line, rec) in reader(path)?.records().enumerate() {
        let rec = rec.map_err(|e| ClimError::parse(path, e.to_string()))?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(col, field)| {
                parse(field).ok_or_else(|| {
                    ClimError::parse(
                        path,
                        format!("line {}, column {}: cannot parse {field:?}", line + 1, col + 1),
                    )
                })
            })
            .collect::<Result<Vec<T>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(ClimError::parse(path, "empty file"));
    }
    let width = rows[0].len();
    if let Some(bad) = rows.iter().position(|r| r.len() != width) {
        return Err(ClimError::parse(
            path,
            format!("line {} has {} fields, expected {width}", bad + 1, rows[bad].len()),
        ));
    }
    Ok(rows)
}

/// Reads a headerless `rows x cols` CSV of reals.
pub fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    let rows = read_rows(path, |s| s.parse::<f64>().ok().filter(|x| x.is_finite()))?;
    let (r, c) = (rows.len(), rows[0].len());
    Ok(Matrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn read_mask_csv(path: &Path) -> Result<DMatrix<bool>> {
    let rows = read_rows(path, |s| match s {
        "0" => Some(false),
        "1" => Some(true),
        _ => None,
    })?;
    let (r, c) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn read_labels_csv(path: &Path) -> Result<Vec<usize>> {
    let rows = read_rows(path, |s| s.parse::<usize>().ok())?;
    if rows[0].len() != 1 {
        return Err(ClimError::parse(path, "labels file must have a single column"));
    }
    Ok(rows.into_iter().map(|r| r[0]).collect())
}

fn write_lines(path: &Path, lines: impl Iterator<Item = String>) -> Result<()> {
    let mut out = String::new();
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| ClimError::io(path, e))
}

/// Formats a real with 17 significant digits, enough to round-trip any f64.
pub(crate) fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_matrix_csv(path: &Path, m: &Matrix) -> Result<()> {
    write_lines(
        path,
        m.row_iter().map(|r| {
            r.iter()
                .map(|&x| fmt_real(x))
                .collect::<Vec<_>>()
                .join(",")
        }),
    )
}

pub fn write_mask_csv(path: &Path, m: &DMatrix<bool>) -> Result<()> {
    write_lines(
        path,
        m.row_iter().map(|r| {
            r.iter()
                .map(|&o| if o { "1" } else { "0" })
                .collect::<Vec<_>>()
                .join(",")
        }),
    )
}

pub fn write_labels_csv(path: &Path, labels: &[usize]) -> Result<()> {
    write_lines(path, labels.iter().map(|l| l.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fixture(dir: &Path, labels: bool, second_cols: usize) -> PathBuf {
        fs::write(dir.join("a.csv"), "1,2,3,4,5\n0.5,0.25,1e-3,-2,7\n6,7,8,9,10\n").unwrap();
        let row: Vec<String> = (0..second_cols).map(|i| i.to_string()).collect();
        let line = row.join(",");
        fs::write(dir.join("b.csv"), format!("{line}\n{line}\n{line}\n")).unwrap();
        fs::write(dir.join("y.csv"), "0\n1\n1\n0\n2\n").unwrap();
        let manifest = format!(
            r#"{{"views": [{{"name": "a", "path": "a.csv"}}, {{"name": "b", "path": "b.csv"}}], "labels": {}}}"#,
            if labels { "\"y.csv\"" } else { "null" }
        );
        let p = dir.join("m.json");
        fs::write(&p, manifest).unwrap();
        p
    }

    #[test]
    fn loads_two_views_with_labels() {
        let dir = tempfile::tempdir().unwrap();
        let ds = load_manifest(&fixture(dir.path(), true, 5)).unwrap();
        assert_eq!(ds.n_views(), 2);
        assert_eq!(ds.n_samples(), 5);
        assert_eq!(ds.labels().unwrap(), &[0, 1, 1, 0, 2]);
        assert_eq!(ds.view(0)[(1, 2)], 1e-3);
    }

    #[test]
    fn mismatched_columns_is_a_shape_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_manifest(&fixture(dir.path(), true, 4)).unwrap_err();
        assert!(matches!(err, ClimError::Shape(_)));
    }

    #[test]
    fn labels_are_optional() {
        let dir = tempfile::tempdir().unwrap();
        let ds = load_manifest(&fixture(dir.path(), false, 5)).unwrap();
        assert!(ds.labels().is_none());
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("m.json"),
            r#"{"views": [{"name": "a", "path": "nope.csv"}], "labels": null}"#,
        )
        .unwrap();
        assert!(load_manifest(&dir.path().join("m.json")).is_err());
    }

    #[test]
    fn ragged_csv_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        fs::write(&p, "1,2\n3\n").unwrap();
        assert!(read_matrix_csv(&p).is_err());
        fs::write(&p, "1,x\n").unwrap();
        assert!(read_matrix_csv(&p).is_err());
    }

    #[test]
    fn masks_roundtrip_through_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let x = Matrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let ds = MultiViewDataset::from_views(vec![x], Some(vec![0, 1, 0])).unwrap();
        let m = MaskMatrix::new(vec![DMatrix::from_row_slice(
            2,
            3,
            &[true, false, true, true, true, false],
        )]);
        let p = save_dataset(&ds, Some(&m), dir.path()).unwrap();
        let (back, masks) = load_manifest_with_masks(&p).unwrap();
        assert_eq!(back, ds);
        assert_eq!(masks.unwrap(), m);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn save_then_load_is_bit_exact(
            vals in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO, 12),
            labels in prop::collection::vec(0usize..4, 4),
        ) {
            let dir = tempfile::tempdir().unwrap();
            let a = Matrix::from_vec(2, 4, vals[..8].to_vec());
            let b = Matrix::from_vec(1, 4, vals[8..].to_vec());
            let ds = MultiViewDataset::from_views(vec![a, b], Some(labels)).unwrap();
            let p = save_dataset(&ds, None, dir.path()).unwrap();
            let back = load_manifest(&p).unwrap();
            for (x, y) in ds.views().iter().zip(back.views()) {
                for (p, q) in x.iter().zip(y.iter()) {
                    prop_assert_eq!(p.to_bits(), q.to_bits());
                }
            }
            prop_assert_eq!(ds.labels(), back.labels());
        }
    }
}
