use dualcert::data::idx::{parse_idx, write_idx_images, write_idx_labels, IMAGES_MAGIC, LABELS_MAGIC};
use dualcert::data::{generate_uos, load_idx_images_sized, SubspaceModel};
use dualcert::linalg::{norm, rank};
use dualcert::numerics::RngSeed;
use nalgebra::DMatrix;

#[test]
fn idx_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let pixels: Vec<u8> = (0..2 * 4 * 4).map(|i| (i * 7 % 256) as u8 + 1).collect();
    let img = dir.path().join("img.idx");
    let lab = dir.path().join("lab.idx");
    write_idx_images(&img, 4, 4, &pixels).unwrap();
    write_idx_labels(&lab, &[3, 8]).unwrap();
    let arr = parse_idx(&std::fs::read(&img).unwrap(), IMAGES_MAGIC).unwrap();
    assert_eq!(arr.dims, vec![2, 4, 4]);
    assert_eq!(arr.data, pixels);
    assert!(parse_idx(&std::fs::read(&img).unwrap(), LABELS_MAGIC).is_err());
    let data = load_idx_images_sized(&img, &lab, 4).unwrap();
    assert_eq!(data.labels(), &[3, 8]);
    assert!(data.points().iter().all(|x| (norm(x) - 1.0).abs() <= 1e-12));
}

#[test]
fn noiseless_uos_classes_have_subspace_rank() {
    let model = SubspaceModel::random(12, 3, 2, 0.0, RngSeed(1)).unwrap();
    let data = generate_uos(&model, 10, RngSeed(2)).unwrap();
    for k in 0..2 {
        let cols: Vec<&Vec<f64>> = data.points().iter().zip(data.labels()).filter(|(_, &l)| l == k).map(|(p, _)| p).collect();
        let m = DMatrix::from_fn(12, cols.len(), |r, c| cols[c][r]);
        assert_eq!(rank(&m, 1e-9), 3);
    }
}
