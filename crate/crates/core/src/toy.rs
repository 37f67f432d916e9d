//! Generators and loaders for the 2D experiments: the Gaussian-ring /
//! squares toy, held-out class splits, the two-class VLines dataset, and
//! the continuous angle-conditioned toy.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::linalg::Vector;
use crate::{Error, Real};

/// Generation condition: a class id or a continuous angle in radians.
#[derive(Clone, Debug, PartialEq)]
pub enum Condition {
    Class(String),
    Angle(f64),
}

impl Condition {
    /// Stable string form used in CSV files and report keys.
    pub fn label(&self) -> String {
        match self {
            Condition::Class(id) => id.clone(),
            Condition::Angle(theta) => format!("{theta:.6}"),
        }
    }

    pub fn parse(text: &str, angle_mode: bool) -> Condition {
        if angle_mode {
            if let Ok(theta) = text.parse::<f64>() {
                return Condition::Angle(theta);
            }
        }
        Condition::Class(text.to_string())
    }
}

/// Synthetic condition embedding for the continuous toy:
/// `E(theta) = (cos t, sin t, cos 2t, sin 2t)`, smooth and injective on
/// [0, 2pi).
pub fn angle_embedding<S: Real>(theta: f64) -> Vector<S> {
    Vector::from_f64(&[
        theta.cos(),
        theta.sin(),
        (2.0 * theta).cos(),
        (2.0 * theta).sin(),
    ])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// One data point with its condition and split tag.
#[derive(Clone, Debug)]
pub struct LabeledSample<S> {
    pub x1: Vector<S>,
    pub condition: Condition,
    pub split: Split,
}

/// Dataset variants for the toy experiments.
#[derive(Clone, Debug)]
pub enum ToyVariant {
    /// Class centers on a ring, targets uniform on small squares.
    Ring {
        k: usize,
        radius: f64,
        prior_std: f64,
        square_side: f64,
    },
    /// Two interleaved multi-modal classes from a VLines-format CSV.
    Vlines { csv: String },
    /// Points on a circle conditioned on a continuous angle; test angles
    /// are offset by half the training spacing.
    Angle {
        k_train: usize,
        radius: f64,
        noise_std: f64,
    },
}

/// Full dataset specification.
#[derive(Clone, Debug)]
pub struct ToySpec {
    pub variant: ToyVariant,
    pub n_per_class: usize,
    pub seed: u64,
}

impl ToySpec {
    pub fn ring_defaults(n_per_class: usize, seed: u64) -> Self {
        ToySpec {
            variant: ToyVariant::Ring {
                k: 8,
                radius: 5.0,
                prior_std: 0.2,
                square_side: 0.2,
            },
            n_per_class,
            seed,
        }
    }

    pub fn angle_defaults(n_per_class: usize, seed: u64) -> Self {
        ToySpec {
            variant: ToyVariant::Angle {
                k_train: 8,
                radius: 5.0,
                noise_std: 0.1,
            },
            n_per_class,
            seed,
        }
    }

    pub fn is_angle(&self) -> bool {
        matches!(self.variant, ToyVariant::Angle { .. })
    }
}

/// Generate the dataset described by the spec. Deterministic per seed.
pub fn generate<S: Real>(spec: &ToySpec) -> Result<Vec<LabeledSample<S>>, Error> {
    match &spec.variant {
        ToyVariant::Ring {
            k,
            radius,
            prior_std: _,
            square_side,
        } => Ok(gen_ring_squares(
            *k,
            *radius,
            *square_side,
            spec.n_per_class,
            spec.seed,
        )),
        ToyVariant::Vlines { csv } => load_vlines_csv(Path::new(csv)),
        ToyVariant::Angle {
            k_train,
            radius,
            noise_std,
        } => gen_angle_conditioned(*k_train, *radius, *noise_std, spec.n_per_class, spec.seed),
    }
}

/// Ring of `k` class centers at `radius * (cos, sin)(2 pi i / k)`; targets
/// are uniform on axis-aligned squares of side `square_side` around each
/// center. Class ids are "0".."k-1".
pub fn gen_ring_squares<S: Real>(
    k: usize,
    radius: f64,
    square_side: f64,
    n_per_class: usize,
    seed: u64,
) -> Vec<LabeledSample<S>> {
    use rand::Rng as _;
    let mut rng = crate::rng_from_seed(seed);
    let mut out = Vec::with_capacity(k * n_per_class);
    for i in 0..k {
        let angle = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
        let cx = radius * angle.cos();
        let cy = radius * angle.sin();
        for _ in 0..n_per_class {
            let dx = (rng.gen::<f64>() - 0.5) * square_side;
            let dy = (rng.gen::<f64>() - 0.5) * square_side;
            out.push(LabeledSample {
                x1: Vector::from_f64(&[cx + dx, cy + dy]),
                condition: Condition::Class(i.to_string()),
                split: Split::Train,
            });
        }
    }
    out
}

/// Split off entire classes for held-out evaluation: train excludes the
/// held classes, test contains only them.
pub fn holdout_split<S: Real>(
    dataset: Vec<LabeledSample<S>>,
    held_classes: &BTreeSet<String>,
) -> Result<(Vec<LabeledSample<S>>, Vec<LabeledSample<S>>), Error> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut s in dataset {
        let held = match &s.condition {
            Condition::Class(id) => held_classes.contains(id),
            Condition::Angle(theta) => held_classes.contains(&format!("{theta:.6}")),
        };
        if held {
            s.split = Split::Test;
            test.push(s);
        } else {
            s.split = Split::Train;
            train.push(s);
        }
    }
    if train.is_empty() {
        return Err(Error::Empty("holdout_split left no training classes".into()));
    }
    Ok((train, test))
}

/// Load the two-class VLines dataset from a Datasaurus-format CSV with
/// columns (dataset, x, y), keeping rows where dataset == "v_lines".
///
/// Points are standardized to zero mean and unit per-axis std. The class
/// rule splits the vertical lines by x coordinate into two interleaved
/// groups (every other line), so each class is multi-modal with
/// intersecting hulls: lines 0, 2, 4, ... form class "A", the rest "B".
pub fn load_vlines_csv<S: Real>(path: &Path) -> Result<Vec<LabeledSample<S>>, Error> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::io(
                path.display().to_string(),
                std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string()),
            ),
            _ => Error::Format {
                path: path.display().to_string(),
                row: 0,
                detail: e.to_string(),
            },
        })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Format {
            path: path.display().to_string(),
            row: 0,
            detail: e.to_string(),
        })?
        .clone();
    let col = |name: &str| -> Result<usize, Error> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format {
                path: path.display().to_string(),
                row: 0,
                detail: format!("missing column '{name}'"),
            })
    };
    let c_dataset = col("dataset")?;
    let c_x = col("x")?;
    let c_y = col("y")?;

    let mut points: Vec<(f64, f64)> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 2; // 1-based, after header
        let record = record.map_err(|e| Error::Format {
            path: path.display().to_string(),
            row,
            detail: e.to_string(),
        })?;
        if record.get(c_dataset) != Some("v_lines") {
            continue;
        }
        let parse = |ci: usize, name: &str| -> Result<f64, Error> {
            record
                .get(ci)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| Error::Format {
                    path: path.display().to_string(),
                    row,
                    detail: format!("bad '{name}' value"),
                })
        };
        points.push((parse(c_x, "x")?, parse(c_y, "y")?));
    }
    if points.is_empty() {
        return Err(Error::Empty(format!(
            "{}: no v_lines rows",
            path.display()
        )));
    }

    // standardize per axis
    let n = points.len() as f64;
    let (mx, my) = points
        .iter()
        .fold((0.0, 0.0), |(ax, ay), (x, y)| (ax + x, ay + y));
    let (mx, my) = (mx / n, my / n);
    let (vx, vy) = points.iter().fold((0.0, 0.0), |(ax, ay), (x, y)| {
        (ax + (x - mx).powi(2), ay + (y - my).powi(2))
    });
    let (sx, sy) = ((vx / n).sqrt().max(1e-12), (vy / n).sqrt().max(1e-12));

    // cluster x coordinates into vertical lines, then interleave classes
    let mut xs: Vec<f64> = points.iter().map(|(x, _)| *x).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    let mut line_centers: Vec<f64> = Vec::new();
    // lines are well separated relative to in-line jitter; use gaps larger
    // than a tenth of the total spread as separators
    let spread = xs.last().unwrap() - xs.first().unwrap();
    let gap = (spread / 10.0).max(1e-9);
    let mut cluster_start = xs[0];
    let mut cluster_last = xs[0];
    for &x in &xs[1..] {
        if x - cluster_last > gap {
            line_centers.push(0.5 * (cluster_start + cluster_last));
            cluster_start = x;
        }
        cluster_last = x;
    }
    line_centers.push(0.5 * (cluster_start + cluster_last));

    let out = points
        .into_iter()
        .map(|(x, y)| {
            let line = line_centers
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    (x - **a).abs().partial_cmp(&(x - **b).abs()).unwrap()
                })
                .map(|(i, _)| i)
                .unwrap_or(0);
            let id = if line % 2 == 0 { "A" } else { "B" };
            LabeledSample {
                x1: Vector::from_f64(&[(x - mx) / sx, (y - my) / sy]),
                condition: Condition::Class(id.to_string()),
                split: Split::Train,
            }
        })
        .collect();
    Ok(out)
}

/// Write a synthetic VLines-style CSV in the Datasaurus column layout:
/// `k_lines` vertical lines spanning the y range, deterministic per seed.
pub fn write_synthetic_vlines_csv(path: &Path, k_lines: usize, n_per_line: usize, seed: u64) -> Result<(), Error> {
    use rand::Rng as _;
    use std::io::Write as _;
    let mut rng = crate::rng_from_seed(seed);
    let mut file =
        std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    writeln!(file, "dataset,x,y").map_err(|e| Error::io(path.display().to_string(), e))?;
    for line in 0..k_lines {
        let cx = 30.0 + 10.0 * line as f64;
        for _ in 0..n_per_line {
            let x = cx + rng.gen_range(-0.4..0.4);
            let y = rng.gen_range(10.0..90.0);
            writeln!(file, "v_lines,{x:.4},{y:.4}")
                .map_err(|e| Error::io(path.display().to_string(), e))?;
        }
    }
    Ok(())
}

/// Continuous toy: training angles evenly spaced on [0, 2pi), test angles
/// offset by half the spacing, points at `radius * (cos, sin)(theta)` plus
/// isotropic noise.
pub fn gen_angle_conditioned<S: Real>(
    k_train: usize,
    radius: f64,
    noise_std: f64,
    n_per_class: usize,
    seed: u64,
) -> Result<Vec<LabeledSample<S>>, Error> {
    if k_train < 2 {
        return Err(Error::Domain("angle toy needs k_train >= 2".into()));
    }
    let mut rng = crate::rng_from_seed(seed);
    let spacing = 2.0 * std::f64::consts::PI / k_train as f64;
    let mut out = Vec::new();
    for (split, offset) in [(Split::Train, 0.0), (Split::Test, 0.5 * spacing)] {
        for i in 0..k_train {
            let theta = i as f64 * spacing + offset;
            for _ in 0..n_per_class {
                let nx = f64::std_normal(&mut rng) * noise_std;
                let ny = f64::std_normal(&mut rng) * noise_std;
                out.push(LabeledSample {
                    x1: Vector::from_f64(&[radius * theta.cos() + nx, radius * theta.sin() + ny]),
                    condition: Condition::Angle(theta),
                    split,
                });
            }
        }
    }
    Ok(out)
}

/// Write a dataset CSV with schema (condition, x_0.., split).
pub fn write_dataset_csv<S: Real>(path: &Path, dataset: &[LabeledSample<S>]) -> Result<(), Error> {
    use std::io::Write as _;
    let d = dataset.first().map(|s| s.x1.dim()).unwrap_or(2);
    let mut file =
        std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let coords: Vec<String> = (0..d).map(|i| format!("x_{i}")).collect();
    writeln!(file, "condition,{},split", coords.join(","))
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    for s in dataset {
        let coords: Vec<String> = s.x1.0.iter().map(|v| format!("{}", Real::to_f64(*v))).collect();
        writeln!(
            file,
            "{},{},{}",
            s.condition.label(),
            coords.join(","),
            s.split.as_str()
        )
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(())
}

/// Read a dataset CSV written by [`write_dataset_csv`].
pub fn read_dataset_csv<S: Real>(path: &Path, angle_mode: bool) -> Result<Vec<LabeledSample<S>>, Error> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::io(
            path.display().to_string(),
            std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string()),
        ))?;
    let n_cols = reader
        .headers()
        .map_err(|e| Error::Format {
            path: path.display().to_string(),
            row: 0,
            detail: e.to_string(),
        })?
        .len();
    if n_cols < 3 {
        return Err(Error::Format {
            path: path.display().to_string(),
            row: 0,
            detail: "expected columns condition, x_0.., split".into(),
        });
    }
    let d = n_cols - 2;
    let mut out = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 2;
        let record = record.map_err(|e| Error::Format {
            path: path.display().to_string(),
            row,
            detail: e.to_string(),
        })?;
        let mut coords = Vec::with_capacity(d);
        for ci in 1..=d {
            let v: f64 = record
                .get(ci)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Format {
                    path: path.display().to_string(),
                    row,
                    detail: format!("bad coordinate in column {ci}"),
                })?;
            coords.push(v);
        }
        let split = match record.get(d + 1) {
            Some("train") => Split::Train,
            Some("test") => Split::Test,
            other => {
                return Err(Error::Format {
                    path: path.display().to_string(),
                    row,
                    detail: format!("bad split tag {other:?}"),
                })
            }
        };
        out.push(LabeledSample {
            x1: Vector::from_f64(&coords),
            condition: Condition::parse(record.get(0).unwrap_or(""), angle_mode),
            split,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::fit_discrete_prior;

    #[test]
    fn ring_centers_at_right_angles() {
        let data: Vec<LabeledSample<f64>> = gen_ring_squares(4, 5.0, 0.2, 10, 0);
        let prior = fit_discrete_prior(&data).unwrap();
        let expected = [(5.0, 0.0), (0.0, 5.0), (-5.0, 0.0), (0.0, -5.0)];
        for (i, (cx, cy)) in expected.iter().enumerate() {
            let mean = &prior.components[&i.to_string()].mean;
            assert!((mean.0[0] - cx).abs() < 0.15 && (mean.0[1] - cy).abs() < 0.15);
        }
    }

    #[test]
    fn ring_samples_inside_squares() {
        let data: Vec<LabeledSample<f64>> = gen_ring_squares(8, 5.0, 0.2, 100, 1);
        for s in &data {
            let idx: usize = match &s.condition {
                Condition::Class(id) => id.parse().unwrap(),
                _ => panic!(),
            };
            let angle = 2.0 * std::f64::consts::PI * idx as f64 / 8.0;
            let cx = 5.0 * angle.cos();
            let cy = 5.0 * angle.sin();
            assert!((s.x1.0[0] - cx).abs() <= 0.1 + 1e-12);
            assert!((s.x1.0[1] - cy).abs() <= 0.1 + 1e-12);
        }
    }

    #[test]
    fn ring_class_means_match_uniform_moments() {
        // per-class mean within 3 (side / sqrt 12) / sqrt n of the center
        let n = 1000;
        let side = 0.2;
        let margin = 3.0 * (side / 12.0_f64.sqrt()) / (n as f64).sqrt();
        let data: Vec<LabeledSample<f64>> = gen_ring_squares(4, 5.0, side, n, 2);
        let prior = fit_discrete_prior(&data).unwrap();
        for (id, comp) in &prior.components {
            let idx: usize = id.parse().unwrap();
            let angle = 2.0 * std::f64::consts::PI * idx as f64 / 4.0;
            assert!((comp.mean.0[0] - 5.0 * angle.cos()).abs() < margin);
            assert!((comp.mean.0[1] - 5.0 * angle.sin()).abs() < margin);
        }
    }

    #[test]
    fn holdout_empty_set() {
        let data: Vec<LabeledSample<f64>> = gen_ring_squares(4, 5.0, 0.2, 5, 0);
        let total = data.len();
        let (train, test) = holdout_split(data, &BTreeSet::new()).unwrap();
        assert!(test.is_empty());
        assert_eq!(train.len(), total);
    }

    #[test]
    fn holdout_two_of_eight() {
        let data: Vec<LabeledSample<f64>> = gen_ring_squares(8, 5.0, 0.2, 5, 0);
        let held: BTreeSet<String> = ["6".to_string(), "7".to_string()].into();
        let (train, test) = holdout_split(data, &held).unwrap();
        let train_ids: BTreeSet<String> = train.iter().map(|s| s.condition.label()).collect();
        let test_ids: BTreeSet<String> = test.iter().map(|s| s.condition.label()).collect();
        assert_eq!(train_ids.len(), 6);
        assert_eq!(test_ids.len(), 2);
        assert!(train_ids.is_disjoint(&test_ids));
        assert_eq!(train.len() + test.len(), 8 * 5);
    }

    #[test]
    fn holdout_all_classes_errors() {
        let data: Vec<LabeledSample<f64>> = gen_ring_squares(2, 5.0, 0.2, 5, 0);
        let held: BTreeSet<String> = ["0".to_string(), "1".to_string()].into();
        assert!(matches!(holdout_split(data, &held), Err(Error::Empty(_))));
    }

    #[test]
    fn vlines_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("saurus.csv");
        write_synthetic_vlines_csv(&path, 6, 30, 3).unwrap();
        let data: Vec<LabeledSample<f64>> = load_vlines_csv(&path).unwrap();
        assert_eq!(data.len(), 180);
        // standardized: per-axis mean ~ 0
        let mut mx = 0.0;
        let mut my = 0.0;
        for s in &data {
            mx += s.x1.0[0];
            my += s.x1.0[1];
        }
        assert!((mx / 180.0).abs() < 1e-9);
        assert!((my / 180.0).abs() < 1e-9);
        // interleaved classes, both multimodal
        let a = data
            .iter()
            .filter(|s| s.condition == Condition::Class("A".into()))
            .count();
        assert_eq!(a, 90);
    }

    #[test]
    fn vlines_no_rows_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("other.csv");
        std::fs::write(&path, "dataset,x,y\ndino,1.0,2.0\n").unwrap();
        let res: Result<Vec<LabeledSample<f64>>, _> = load_vlines_csv(&path);
        assert!(matches!(res, Err(Error::Empty(_))));
    }

    #[test]
    fn vlines_missing_file_errors() {
        let res: Result<Vec<LabeledSample<f64>>, _> =
            load_vlines_csv(Path::new("/nonexistent/file.csv"));
        assert!(matches!(res, Err(Error::Io { .. })));
    }

    #[test]
    fn vlines_malformed_row_reports_row_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "dataset,x,y\nv_lines,1.0,2.0\nv_lines,oops,3.0\n").unwrap();
        match load_vlines_csv::<f64>(&path) {
            Err(Error::Format { row, .. }) => assert_eq!(row, 3),
            other => panic!("expected Format error, got {other:?}"),
        }
    }

    #[test]
    fn angle_toy_noise_free_on_circle() {
        let data: Vec<LabeledSample<f64>> = gen_angle_conditioned(8, 5.0, 0.0, 3, 0).unwrap();
        for s in &data {
            assert!((s.x1.norm() - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn angle_toy_test_angles_disjoint() {
        let data: Vec<LabeledSample<f64>> = gen_angle_conditioned(8, 5.0, 0.1, 2, 0).unwrap();
        let train: BTreeSet<String> = data
            .iter()
            .filter(|s| s.split == Split::Train)
            .map(|s| s.condition.label())
            .collect();
        let test: BTreeSet<String> = data
            .iter()
            .filter(|s| s.split == Split::Test)
            .map(|s| s.condition.label())
            .collect();
        assert!(train.is_disjoint(&test));
        assert_eq!(train.len(), 8);
        assert_eq!(test.len(), 8);
    }

    #[test]
    fn generators_deterministic() {
        let a: Vec<LabeledSample<f64>> = gen_ring_squares(8, 5.0, 0.2, 20, 7);
        let b: Vec<LabeledSample<f64>> = gen_ring_squares(8, 5.0, 0.2, 20, 7);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.x1, y.x1);
        }
    }

    #[test]
    fn dataset_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let data: Vec<LabeledSample<f64>> = gen_ring_squares(3, 5.0, 0.2, 4, 0);
        write_dataset_csv(&path, &data).unwrap();
        let loaded: Vec<LabeledSample<f64>> = read_dataset_csv(&path, false).unwrap();
        assert_eq!(loaded.len(), data.len());
        for (a, b) in data.iter().zip(&loaded) {
            assert_eq!(a.condition.label(), b.condition.label());
            assert!(a.x1.dist(&b.x1) < 1e-12);
        }
    }
}
