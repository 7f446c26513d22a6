use std::path::PathBuf;

use refscan_core::dataset::{
    import_csv, load_manifest, split_stats, synth_dataset, AnnotatedPage, DatasetError, DatasetManifest, Layout, Split,
};
use refscan_core::imgproc::{encode_png, RasterImage};
use refscan_core::RefBox;

/// Manifest with `pages[layout][split]` pages whose reference counts add up
/// to `refs[split]` per split.
fn manifest_with(pages: [[usize; 3]; 3], refs: [usize; 3]) -> DatasetManifest {
    let mut m = DatasetManifest::new("counts");
    for split in Split::ALL {
        let s = split as usize;
        let layouts: Vec<Layout> = Layout::ALL
            .into_iter()
            .flat_map(|l| std::iter::repeat_n(l, pages[l as usize][s]))
            .collect();
        let n = layouts.len();
        for (i, layout) in layouts.into_iter().enumerate() {
            let count = refs[s] / n + usize::from(i < refs[s] % n);
            m.splits.get_mut(split).push(AnnotatedPage {
                image_path: PathBuf::from(format!("{split}/{i:05}.png")),
                width: 1000,
                height: 20_000,
                boxes: (0..count as u32).map(|k| RefBox::new(10, 10 + 30 * k, 500, 25)).collect(),
                layout,
            });
        }
    }
    m
}

#[test]
fn large_corpus_counts() {
    let m = manifest_with([[1411, 124, 705], [92, 7, 46], [10, 1, 5]], [24606, 2013, 12244]);
    assert!(m.validate(None).is_ok());
    let s = split_stats(&m);
    assert_eq!([Split::Train, Split::Validation, Split::Test].map(|x| s.pages(x)), [1513, 132, 756]);
    assert_eq!([Split::Train, Split::Validation, Split::Test].map(|x| s.refs(x)), [24606, 2013, 12244]);
    assert_eq!(s.layout(Layout::Single).pages, [1411, 124, 705]);
    assert_eq!(s.layout(Layout::Double).pages, [92, 7, 46]);
    assert_eq!(s.layout(Layout::Triple).pages, [10, 1, 5]);
    let table = s.to_string();
    assert!(table.contains("No. of Images") && table.contains("Triple Column"));
}

#[test]
fn small_corpus_counts() {
    let m = manifest_with([[270, 24, 136], [17, 1, 7], [0, 0, 0]], [5741, 478, 2547]);
    let s = split_stats(&m);
    assert_eq!([Split::Train, Split::Validation, Split::Test].map(|x| s.pages(x)), [287, 25, 143]);
    assert_eq!([Split::Train, Split::Validation, Split::Test].map(|x| s.refs(x)), [5741, 478, 2547]);
    assert!(!s.by_layout.contains_key(&Layout::Triple));
}

#[test]
fn json_round_trip_and_validation_errors() {
    let mut m = manifest_with([[3, 1, 1], [0; 3], [0; 3]], [6, 2, 2]);
    let back = DatasetManifest::from_json(&m.to_json()).unwrap();
    assert_eq!(back, m);
    m.splits.test[0].boxes.push(RefBox::new(990, 0, 20, 5));
    m.splits.validation.push(m.splits.train[0].clone());
    let report = m.validate(None);
    assert_eq!(report.issues.len(), 2, "{report}");
}

#[test]
fn synthetic_dataset_writes_a_loadable_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_dataset("synthetic", 10, &Layout::ALL, 1).unwrap();
    let path = data.write(dir.path()).unwrap();
    let loaded = load_manifest(&path).unwrap();
    assert_eq!(loaded, data.manifest);
    assert_eq!(loaded.page_count(), 10);
    std::fs::remove_file(dir.path().join(&loaded.splits.train[0].image_path)).unwrap();
    assert!(matches!(load_manifest(&path), Err(DatasetError::Validation(_))));
}

#[test]
fn csv_import_reads_page_sizes_from_images() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.png"), encode_png(&RasterImage::filled(120, 80, 255).unwrap()).unwrap()).unwrap();
    let csv = dir.path().join("boxes.csv");
    std::fs::write(&csv, "image,x,y,w,h\na.png,1,2,30,4\na.png,1,10,30,4\n").unwrap();
    let pages = import_csv(&csv, dir.path(), Layout::Single).unwrap();
    assert_eq!(pages.len(), 1);
    assert_eq!((pages[0].width, pages[0].height), (120, 80));
    assert_eq!(pages[0].boxes, [RefBox::new(1, 2, 30, 4), RefBox::new(1, 10, 30, 4)]);
    std::fs::write(&csv, "a.png,1,2,30\n").unwrap();
    assert!(matches!(import_csv(&csv, dir.path(), Layout::Single), Err(DatasetError::Parse(_))));
}
