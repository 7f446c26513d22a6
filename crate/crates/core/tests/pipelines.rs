use std::sync::Arc;

use rand::Rng;

use refscan_core::adapter::CommandConfig;
use refscan_core::dataset::{synth_page, Layout, RefStyle, SynthSpec};
use refscan_core::evalkit::iou;
use refscan_core::imgproc::{encode_png, RasterImage};
use refscan_core::pipelines::{
    emit_xml, ensemble_merge, pair_records, parse_xml, render_overlay, run_layout, validate_xml, CommandOcr,
    DetectorAttr, Extractor, FileType, JobSpec, LayoutOptions, Pipeline, PipelineConfig, PipelineError, RefRecord,
    ScriptedOcr, Source, Tagger, COLOR_BOTH, COLOR_LAYOUT_ONLY, COLOR_TEXT_ONLY, RESULT_FILE,
};
use refscan_core::textref::{Namer, TaggedReference};
use refscan_core::RefBox;
use refscan_oracles::gen;
use refscan_oracles::pairing::brute_force_pairing;

fn page(layout: Layout, style: RefStyle, seed: u64) -> refscan_core::dataset::SynthPage {
    synth_page(&SynthSpec::new(layout, 8 * layout.columns() as usize, style, seed)).unwrap()
}

#[test]
fn layout_records_align_with_ground_truth_under_scripted_ocr() {
    for (i, style) in RefStyle::ALL.into_iter().enumerate() {
        for layout in Layout::ALL {
            let p = page(layout, style, 40 + i as u64);
            let ocr = ScriptedOcr::from_synth(std::slice::from_ref(&p));
            let out = run_layout(std::slice::from_ref(&p.image), &LayoutOptions::default(), &ocr, &Tagger::Rules).unwrap();
            assert_eq!(out.records.len(), p.page.boxes.len(), "{layout:?} {style:?}");
            for (gt, text) in p.page.boxes.iter().zip(&p.texts) {
                let hits: Vec<&RefRecord> = out
                    .records
                    .iter()
                    .filter(|r| iou(&r.bbox.unwrap(), gt) >= 0.5)
                    .collect();
                assert_eq!(hits.len(), 1);
                assert_eq!(hits[0].raw(), text);
                assert_eq!(hits[0].detector, DetectorAttr::Layout);
            }
            assert!(out.warnings.is_empty());
        }
    }
}

#[test]
fn ocr_failure_keeps_boxes_with_empty_text() {
    let p = page(Layout::Single, RefStyle::Numbered, 5);
    let down = CommandOcr::new("down", CommandConfig::new("/nonexistent/ocr-engine", &["{input}"]));
    let out = run_layout(std::slice::from_ref(&p.image), &LayoutOptions::default(), &down, &Tagger::Rules).unwrap();
    assert!(!out.records.is_empty());
    assert_eq!(out.warnings.len(), out.records.len());
    assert!(out.records.iter().all(|r| r.raw().is_empty() && r.bbox.is_some()));
}

#[test]
fn blank_page_yields_no_records() {
    let blank = RasterImage::filled(400, 300, 255).unwrap();
    let out = run_layout(&[blank], &LayoutOptions::default(), &ScriptedOcr::default(), &Tagger::Rules).unwrap();
    assert!(out.records.is_empty());
    assert!(matches!(
        run_layout(&[], &LayoutOptions::default(), &ScriptedOcr::default(), &Tagger::Rules),
        Err(PipelineError::InvalidInput(_))
    ));
}

fn boxed(source: Source, b: RefBox) -> RefRecord {
    RefRecord {
        page: 1,
        bbox: Some(b),
        source,
        detector: DetectorAttr::Layout,
        score: None,
        tagged: TaggedReference::untagged("", Namer::ParscitLike),
    }
}

#[test]
fn overlay_differs_from_original_exactly_on_outlines() {
    let mut rng = gen::rng(11);
    let original = RasterImage::new(80, 60, 1, (0..80 * 60).map(|i| (i * 7 % 200) as u8).collect()).unwrap();
    for _ in 0..50 {
        let records: Vec<RefRecord> = (0..rng.random_range(1..6))
            .map(|_| {
                let b = RefBox::new(rng.random_range(0..75), rng.random_range(0..55), rng.random_range(1..30), rng.random_range(1..20));
                let source = [Source::LayoutOnly, Source::TextOnly, Source::Both][rng.random_range(0..3)];
                boxed(source, b)
            })
            .collect();
        let overlay = render_overlay(&original, &records);
        let base = original.to_rgb();
        for y in 0..60 {
            for x in 0..80 {
                // Highest-priority outline covering the pixel.
                let mut expected: Option<[u8; 3]> = None;
                for (source, color) in [
                    (Source::TextOnly, COLOR_TEXT_ONLY),
                    (Source::LayoutOnly, COLOR_LAYOUT_ONLY),
                    (Source::Both, COLOR_BOTH),
                ] {
                    for r in records.iter().filter(|r| r.source == source) {
                        let b = r.bbox.unwrap();
                        let inside = x >= b.x && y >= b.y && x < b.x + b.w && y < b.y + b.h;
                        let ring = x < b.x + 3 || y < b.y + 3 || x + 3 >= b.x + b.w || y + 3 >= b.y + b.h;
                        if inside && ring {
                            expected = Some(color);
                        }
                    }
                }
                let got = overlay.pixel(x, y);
                match expected {
                    Some(c) => assert_eq!(got, &c, "({x},{y})"),
                    None => assert_eq!(got, base.pixel(x, y), "({x},{y})"),
                }
            }
        }
    }
    assert_eq!(render_overlay(&original, &[]), original);
}

#[test]
fn both_record_draws_green_rectangle() {
    let img = RasterImage::filled(20, 20, 255).unwrap();
    let o = render_overlay(&img, &[boxed(Source::Both, RefBox::new(2, 2, 10, 8))]);
    assert_eq!(o.pixel(2, 2), &COLOR_BOTH);
    assert_eq!(o.pixel(11, 9), &COLOR_BOTH);
    assert_eq!(o.pixel(6, 6), &[255, 255, 255]);
    assert_eq!(o.pixel(12, 2), &[255, 255, 255]);
}

#[test]
fn xml_round_trip_and_schema_for_random_results() {
    for seed in 0..300 {
        let result = gen::extraction_result(&mut gen::rng(seed));
        let xml = emit_xml(&result);
        validate_xml(std::str::from_utf8(&xml).unwrap()).unwrap_or_else(|e| panic!("seed {seed}: {e:?}"));
        assert_eq!(parse_xml(&xml).unwrap(), result.clone().canonicalized(), "seed {seed}");
    }
}

#[test]
fn ensemble_conserves_records_and_matches_exhaustive_pairing() {
    for seed in 0..300 {
        let (layout, text) = gen::ensemble_records(&mut gen::rng(seed), 6);
        let pairs = pair_records(&layout, &text);
        let oracle = brute_force_pairing(&layout, &text);
        assert_eq!(pairs, oracle.best, "seed {seed}");
        let merged = ensemble_merge(layout.clone(), text.clone());
        assert_eq!(merged.len(), layout.len() + text.len() - pairs.len());
        assert_eq!(merged.iter().filter(|r| r.source == Source::Both).count(), pairs.len());
    }
}

fn scripted_extractor(pages: &[refscan_core::dataset::SynthPage]) -> Extractor {
    Extractor::new(PipelineConfig::default()).with_ocr(Arc::new(ScriptedOcr::from_synth(pages)))
}

#[test]
fn image_job_with_both_pipelines() {
    let dir = tempfile::tempdir().unwrap();
    let p = page(Layout::Double, RefStyle::AuthorFirst, 9);
    let path = dir.path().join("page.png");
    std::fs::write(&path, encode_png(&p.image).unwrap()).unwrap();
    let ex = scripted_extractor(std::slice::from_ref(&p));
    let spec = JobSpec::new(&path, FileType::Image, Pipeline::Both);
    let out = ex.run(&spec).unwrap();
    assert_eq!(out.overlays.len(), 1);
    assert_eq!(out.result.pages, 1);
    let both = out.result.records.iter().filter(|r| r.source == Source::Both).count();
    assert_eq!(both, p.page.boxes.len(), "{:#?}", out.result.warnings);
    assert_eq!(parse_xml(&out.xml).unwrap(), out.result);
    assert_eq!(out.overlays[0].pixel(p.page.boxes[0].x, p.page.boxes[0].y), &COLOR_BOTH);

    let written = out.write_to(&dir.path().join("out")).unwrap();
    assert_eq!(written.len(), 2);
    assert_eq!(std::fs::read(dir.path().join("out").join(RESULT_FILE)).unwrap(), out.xml);
    // Same inputs, same output.
    assert_eq!(ex.run(&spec).unwrap().xml, out.xml);
}

#[test]
fn txt_job_writes_xml_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("refs.txt");
    std::fs::write(&path, "Body text.\n\nReferences\n[1] A. Smith. One. 1999.\n[2] B. Doe. Two. 2001.\n").unwrap();
    let out = Extractor::new(PipelineConfig::default())
        .run(&JobSpec::new(&path, FileType::Txt, Pipeline::Text))
        .unwrap();
    assert_eq!(out.result.records.len(), 2);
    assert!(out.overlays.is_empty());
    assert_eq!(out.write_to(&dir.path().join("o")).unwrap().len(), 1);
}

#[test]
fn routing_is_enforced_before_running() {
    let ex = Extractor::new(PipelineConfig::default());
    match ex.run(&JobSpec::new("/does/not/matter.txt", FileType::Txt, Pipeline::Layout)) {
        Err(PipelineError::Spec(errors)) => assert_eq!(errors[0].field, "pipeline"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn scanned_text_pipeline_uses_full_page_ocr() {
    let dir = tempfile::tempdir().unwrap();
    let p = page(Layout::Single, RefStyle::Numbered, 21);
    let path = dir.path().join("scan.png");
    std::fs::write(&path, encode_png(&p.image).unwrap()).unwrap();
    let mut spec = JobSpec::new(&path, FileType::Image, Pipeline::Text);
    spec.dummy_text = true;
    let out = scripted_extractor(std::slice::from_ref(&p)).run(&spec).unwrap();
    let raws: Vec<&str> = out.result.records.iter().map(|r| r.raw()).collect();
    let expected: Vec<String> = (0..p.texts.len()).map(|k| p.reference_lines(k).join("\n")).collect();
    assert_eq!(raws, expected);
    assert!(out.result.records.iter().all(|r| r.source == Source::TextOnly));
}
