//! Train/test splits for the experiment commands.

use std::path::{Path, PathBuf};

use dualcert::data::{build_dictionary, build_dictionary_balanced, generate_uos, load_idx_images, Dictionary, LabeledDataset, SubspaceModel};
use dualcert::numerics::RngSeed;

use crate::cli::{DataArgs, DatasetKind};
use crate::CliError;

/// Dictionary size used by `--full-size`.
pub const FULL_DICT_SIZE: usize = 10_000;
pub const DEFAULT_DICT_SIZE: usize = 2000;

const MODEL_STREAM: u64 = 10;
const TRAIN_STREAM: u64 = 11;
const TEST_STREAM: u64 = 12;
pub const DICT_STREAM: u64 = 1;

pub struct Split {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    /// Generating model of synthetic data.
    pub model: Option<SubspaceModel>,
}

fn idx_path(dir: &Path, stem: &str) -> PathBuf {
    let plain = dir.join(stem);
    if plain.exists() {
        plain
    } else {
        dir.join(format!("{stem}.gz"))
    }
}

/// Reorders a class-blocked dataset so classes alternate.
pub fn interleave(data: &LabeledDataset) -> LabeledDataset {
    let k = data.num_classes();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &l) in data.labels().iter().enumerate() {
        by_class[l].push(i);
    }
    let longest = by_class.iter().map(Vec::len).max().unwrap_or(0);
    let order: Vec<usize> = (0..longest).flat_map(|r| by_class.iter().filter_map(move |c| c.get(r).copied())).collect();
    data.select(&order)
}

/// Synthetic union-of-subspaces split: `per_class` training points and
/// `test_per_class` test points in every class.
pub fn uos_split(
    ambient: usize,
    sub: usize,
    classes: usize,
    gamma: f64,
    per_class: usize,
    test_per_class: usize,
    seed: RngSeed,
) -> Result<Split, CliError> {
    if classes == 0 {
        return Err(CliError::Usage("--classes must be at least 1".into()));
    }
    let model = SubspaceModel::random(ambient, sub, classes, gamma, seed.derive(MODEL_STREAM)).map_err(|e| CliError::Usage(e.to_string()))?;
    let train = interleave(&generate_uos(&model, per_class, seed.derive(TRAIN_STREAM))?);
    let test = interleave(&generate_uos(&model, test_per_class.max(1), seed.derive(TEST_STREAM))?);
    Ok(Split {
        train,
        test,
        model: Some(model),
    })
}

/// Reads a `label,x0,x1,...` CSV as written by `gen-data`.
pub fn read_csv(path: &Path) -> Result<LabeledDataset, CliError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        let bad = |what: &str| CliError::Runtime(format!("{} row {}: bad {what}", path.display(), line + 1));
        let mut it = rec.iter();
        let label: usize = it.next().ok_or_else(|| bad("label"))?.trim().parse().map_err(|_| bad("label"))?;
        let x: Vec<f64> = it.map(|v| v.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad("coordinate"))?;
        labels.push(label);
        points.push(x);
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    Ok(LabeledDataset::new(points, labels, k)?)
}

pub fn dataset_rows(data: &LabeledDataset) -> (Vec<String>, Vec<Vec<String>>) {
    let header = std::iter::once("label".to_string()).chain((0..data.dim()).map(|j| format!("x{j}"))).collect();
    let rows = (0..data.len())
        .map(|i| std::iter::once(data.label(i).to_string()).chain(data.point(i).iter().map(|v| v.to_string())).collect())
        .collect();
    (header, rows)
}

pub fn load(args: &DataArgs, seed: RngSeed) -> Result<Split, CliError> {
    if args.test_points == 0 {
        return Err(CliError::Usage("--test-points must be at least 1".into()));
    }
    let mut split = match args.dataset {
        DatasetKind::Mnist => {
            let dir = &args.data_dir;
            let train = load_idx_images(&idx_path(dir, "train-images-idx3-ubyte"), &idx_path(dir, "train-labels-idx1-ubyte"))?;
            let test = load_idx_images(&idx_path(dir, "t10k-images-idx3-ubyte"), &idx_path(dir, "t10k-labels-idx1-ubyte"))?;
            Split { train, test, model: None }
        }
        DatasetKind::Uos => {
            let per = args.test_points.div_ceil(args.classes.max(1));
            uos_split(args.ambient_dim, args.subspace_dim, args.classes, args.gamma, args.train_per_class, per, seed)?
        }
        DatasetKind::Csv => {
            let (Some(tr), Some(te)) = (&args.train_csv, &args.test_csv) else {
                return Err(CliError::Usage("--dataset csv needs --train-csv and --test-csv".into()));
            };
            let train = read_csv(tr)?;
            let test = read_csv(te)?;
            if train.dim() != test.dim() {
                return Err(CliError::Usage("train and test CSV dimensions differ".into()));
            }
            Split { train, test, model: None }
        }
    };
    if args.test_points > split.test.len() {
        log::warn!("only {} test points available, {} requested", split.test.len(), args.test_points);
    }
    split.test = split.test.head(args.test_points.min(split.test.len()));
    Ok(split)
}

pub fn dictionary(args: &DataArgs, train: &LabeledDataset, seed: RngSeed) -> Result<Dictionary, CliError> {
    let m = if args.full_size {
        FULL_DICT_SIZE
    } else {
        args.dict_size.unwrap_or(DEFAULT_DICT_SIZE.min(train.len()))
    };
    if m == 0 {
        return Err(CliError::Usage("dictionary is empty: --dict-size must be at least 1".into()));
    }
    if m > train.len() {
        return Err(CliError::Usage(format!("--dict-size {m} exceeds the {} available training points", train.len())));
    }
    let dict = if args.balanced {
        build_dictionary_balanced(train, m, seed.derive(DICT_STREAM))?
    } else {
        build_dictionary(train, m, seed.derive(DICT_STREAM))?
    };
    Ok(dict)
}
