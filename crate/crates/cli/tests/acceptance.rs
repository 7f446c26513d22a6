//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit when any
//! criterion fails. Runs without the UI.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use refscan_core::dataset::{synth_dataset, synth_fitting_page, Layout, RefStyle, SynthSpec};
use refscan_core::detector::{detect, Detection, DetectorConfig};
use refscan_core::evalkit::{ablation_run, evaluate, AblationPage, AblationTable};
use refscan_core::imgproc::{compose_hybrid, distance_transform, otsu_from_histogram, DistanceMetric, PreprocessMode, SATURATED_DISTANCE};
use refscan_core::pipelines::{
    emit_xml, ensemble_merge, pair_records, parse_xml, validate_xml, Extractor, JobSpec, PipelineConfig, Source,
};
use refscan_core::RefBox;
use refscan_oracles::coco::brute_force_evaluate;
use refscan_oracles::edt::brute_force_edt;
use rand::Rng;
use refscan_oracles::gen;
use refscan_oracles::otsu::brute_force_otsu;
use refscan_oracles::pairing::brute_force_pairing;
use refscan_service::{ExtractorRunner, JobRunner, RunSummary, Service, ServiceConfig};

type Outcome = Result<String, String>;
type Criterion = fn() -> Outcome;
type PageRun = (String, Vec<RefBox>, Vec<Detection>);

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn metric_oracle() -> Outcome {
    const N: u64 = 1000;
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..N {
        let (dets, gts) = gen::eval_instance(&mut gen::rng(seed), 5, 8);
        let r = evaluate(&dets, &gts).map_err(|e| format!("seed {seed}: {e}"))?;
        let o = brute_force_evaluate(&dets, &gts);
        let mut diffs = vec![
            (r.ap50 - o.ap50).abs(),
            (r.ap75 - o.ap75).abs(),
            (r.map_coco - o.map).abs(),
            (r.ar - o.ar).abs(),
        ];
        for (i, m) in r.per_threshold.iter().enumerate() {
            diffs.push((m.ap - o.ap[i]).abs());
            diffs.push((m.recall - o.recall[i]).abs());
        }
        let d = diffs.into_iter().fold(0.0, f64::max);
        check(d <= 1e-9, || format!("seed {seed}: difference {d:e}"))?;
        worst = worst.max(d);
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("{N} instances, max abs diff {worst:e}, {:.2} s", elapsed.as_secs_f64()))
}

fn distance_oracle() -> Outcome {
    const N: u64 = 600;
    let results: Vec<Result<(f64, f64), String>> = (0..N)
        .into_par_iter()
        .map(|seed| {
            let mut rng = gen::rng(seed);
            // Every fifth image is full size; densities span empty to dense.
            let (w, h) = if seed % 5 == 0 { (64, 64) } else { (rng.random_range(1..=64), rng.random_range(1..=64)) };
            let density = [0.0, 0.001, 0.01, 0.05, 0.2, 0.5, 0.9, 1.0][seed as usize % 8];
            let bin = gen::binary(&mut rng, w, h, density);
            let exact = distance_transform(&bin, DistanceMetric::ExactEuclidean);
            let brute = brute_force_edt(&bin);
            check(exact.data() == brute.as_slice(), || format!("seed {seed} ({w}x{h}): exact transform differs"))?;
            let chamfer = distance_transform(&bin, DistanceMetric::Chamfer3x3);
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for (c, e) in chamfer.data().iter().zip(&brute) {
                if *e == SATURATED_DISTANCE || *e == 0.0 {
                    check(c == e, || format!("seed {seed}: chamfer {c} where exact is {e}"))?;
                } else {
                    lo = lo.min(c / e);
                    hi = hi.max(c / e);
                }
            }
            check(lo >= 0.91 && hi <= 1.06, || format!("seed {seed}: chamfer ratio [{lo}, {hi}]"))?;
            Ok((lo, hi))
        })
        .collect();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in results {
        let (l, h) = r?;
        lo = lo.min(l);
        hi = hi.max(h);
    }
    Ok(format!("{N} images up to 64x64, exact match, chamfer/exact ratio in [{lo:.4}, {hi:.4}]"))
}

fn otsu_oracle() -> Outcome {
    const N: u64 = 1000;
    let mut degenerate = 0;
    for seed in 0..N {
        let hist = gen::histogram(&mut gen::rng(seed));
        let ours = otsu_from_histogram(&hist);
        let brute = brute_force_otsu(&hist);
        match brute {
            Some(t) => check(!ours.degenerate && ours.value == t, || format!("seed {seed}: {ours:?} vs {t}"))?,
            None => {
                check(ours.degenerate, || format!("seed {seed}: expected degenerate, got {ours:?}"))?;
                degenerate += 1;
            }
        }
    }
    Ok(format!("{N} histograms, exact ({degenerate} degenerate)"))
}

fn gt_identity() -> Outcome {
    let mut manifests = 0;
    let identity = |gts: &BTreeMap<String, Vec<RefBox>>| -> Result<(), String> {
        let dets: BTreeMap<String, Vec<Detection>> =
            gts.iter().map(|(k, v)| (k.clone(), v.iter().map(|b| Detection::new(*b, 1.0)).collect())).collect();
        let r = evaluate(&dets, gts).map_err(|e| e.to_string())?;
        check((r.ap50, r.ap75, r.map_coco, r.ar) == (1.0, 1.0, 1.0, 1.0), || {
            format!("ap50 {} ap75 {} mAP {} AR {}", r.ap50, r.ap75, r.map_coco, r.ar)
        })
    };
    for seed in 0..4 {
        let data = synth_dataset("identity", 10, &Layout::ALL, seed).map_err(|e| e.to_string())?;
        identity(&data.manifest.ground_truth())?;
        manifests += 1;
    }
    for seed in 0..500 {
        let (_, gts) = gen::eval_instance(&mut gen::rng(10_000 + seed), 5, 8);
        identity(&gts).map_err(|e| format!("random manifest {seed}: {e}"))?;
        manifests += 1;
    }
    Ok(format!("{manifests} manifests, all four metrics exactly 1.0"))
}

fn ablation_shape() -> Outcome {
    let data = synth_dataset("ablation", 12, &Layout::ALL, 7).map_err(|e| e.to_string())?;
    let pages: Vec<AblationPage> = data
        .pages
        .iter()
        .map(|p| AblationPage { id: p.page.page_id(), image: p.image.clone(), ground_truth: p.page.boxes.clone() })
        .collect();
    let run = || -> Result<AblationTable, String> {
        ablation_run(&pages, &PreprocessMode::ALL, &DetectorConfig::default()).map_err(|e| e.to_string())
    };
    let (a, b) = (run()?, run()?);
    let labels: Vec<&str> = a.rows.iter().map(|r| r.label).collect();
    check(labels == ["Dilation + Distance Transform", "Dilation", "No Pre-processing"], || format!("rows {labels:?}"))?;
    for r in &a.rows {
        let cells = [r.report.map_coco, r.report.ap50, r.report.ap75, r.report.ar];
        check(cells.iter().all(|c| c.is_finite() && (0.0..=1.0).contains(c)), || format!("{}: cells {cells:?}", r.label))?;
    }
    check(a == b && a.to_csv() == b.to_csv(), || "two runs differ".into())?;
    let summary: Vec<String> = a.rows.iter().map(|r| format!("{} AP50 {:.2}", r.label, 100.0 * r.report.ap50)).collect();
    Ok(format!("3 rows, deterministic; {}", summary.join(", ")))
}

fn synthetic_pool(layouts: &[Layout], count: usize, seed_base: u64) -> Result<(f64, f64), String> {
    let per_page: Vec<Result<PageRun, String>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let layout = layouts[i % layouts.len()];
            let style = RefStyle::ALL[i % RefStyle::ALL.len()];
            let n_refs = (6 + i % 9) * layout.columns() as usize;
            let page = synth_fitting_page(&SynthSpec::new(layout, n_refs, style, seed_base + i as u64)).map_err(|e| e.to_string())?;
            let hybrid = compose_hybrid(&page.image, PreprocessMode::Full).map_err(|e| e.to_string())?;
            let dets = detect(&hybrid, &DetectorConfig::default()).map_err(|e| e.to_string())?;
            Ok((format!("page-{i}"), page.page.boxes, dets))
        })
        .collect();
    let mut gts = BTreeMap::new();
    let mut dets = BTreeMap::new();
    for r in per_page {
        let (id, g, d) = r?;
        gts.insert(id.clone(), g);
        dets.insert(id, d);
    }
    let r = evaluate(&dets, &gts).map_err(|e| e.to_string())?;
    Ok((r.ap50, r.ar))
}

fn synthetic_end_to_end() -> Outcome {
    let start = Instant::now();
    let (ap50, ar) = synthetic_pool(&[Layout::Single], 200, 0)?;
    let (multi_ap50, multi_ar) = synthetic_pool(&[Layout::Double, Layout::Triple], 200, 50_000)?;
    let elapsed = start.elapsed();
    let detail = format!(
        "single: AP50 {ap50:.4} AR {ar:.4}; multi-column: AP50 {multi_ap50:.4} AR {multi_ar:.4}; {:.1} s",
        elapsed.as_secs_f64()
    );
    check(ap50 >= 0.90 && ar >= 0.85 && multi_ap50 >= 0.80 && elapsed < Duration::from_secs(300), || detail.clone())?;
    Ok(detail)
}

fn xml_round_trip() -> Outcome {
    const N: u64 = 600;
    let mut records = 0;
    for seed in 0..N {
        // Extraction results are canonical (records ordered by page).
        let r = gen::extraction_result(&mut gen::rng(seed)).canonicalized();
        records += r.records.len();
        let xml = emit_xml(&r);
        let text = std::str::from_utf8(&xml).map_err(|e| format!("seed {seed}: {e}"))?;
        validate_xml(text).map_err(|e| format!("seed {seed}: schema: {e:?}"))?;
        let back = parse_xml(&xml).map_err(|e| format!("seed {seed}: {e}"))?;
        check(back == r, || format!("seed {seed}: round trip differs"))?;
    }
    Ok(format!("{N} results ({records} records), all schema-valid"))
}

fn ensemble_conservation() -> Outcome {
    const N: u64 = 600;
    let (mut pairs_total, mut below_max) = (0, 0);
    for seed in 0..N {
        let (layout, text) = gen::ensemble_records(&mut gen::rng(seed), 6);
        let pairs = pair_records(&layout, &text);
        let merged = ensemble_merge(layout.clone(), text.clone());
        check(merged.len() == layout.len() + text.len() - pairs.len(), || format!("seed {seed}: |merged| {}", merged.len()))?;
        check(merged.iter().filter(|r| r.source == Source::Both).count() == pairs.len(), || format!("seed {seed}: green count"))?;
        let oracle = brute_force_pairing(&layout, &text);
        check(pairs == oracle.best, || format!("seed {seed}: greedy {pairs:?} vs exhaustive {:?}", oracle.best))?;
        let total: f64 = oracle.best.iter().map(|&(i, j)| refscan_oracles::pairing::edge(&layout[i], &text[j]).unwrap().value()).sum();
        if total + 1e-12 < oracle.max_total {
            below_max += 1;
        }
        pairs_total += pairs.len();
    }
    Ok(format!(
        "{N} record sets (<= 6 per side), {pairs_total} pairs; greedy equals exhaustive preference-ordered pairing; \
         {below_max} sets where another matching has a larger similarity sum"
    ))
}

/// Counts runs per input file; files named `throw-*` panic.
struct Instrumented {
    inner: ExtractorRunner,
    runs: Mutex<BTreeMap<String, usize>>,
}

impl JobRunner for Instrumented {
    fn run(&self, spec: &JobSpec, out: &Path) -> Result<RunSummary, String> {
        let name = spec.file.file_name().unwrap().to_string_lossy().into_owned();
        *self.runs.lock().unwrap().entry(name.clone()).or_default() += 1;
        if name.starts_with("throw-") {
            panic!("pipeline threw on {name}");
        }
        self.inner.run(spec, out)
    }
}

fn http(addr: &str, method: &str, path: &str, token: Option<&str>, content_type: Option<&str>, body: &[u8]) -> Result<(u16, Vec<u8>), String> {
    let mut stream = std::net::TcpStream::connect(addr).map_err(|e| e.to_string())?;
    let mut head = format!("{method} {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\nContent-Length: {}\r\n", body.len());
    if let Some(t) = token {
        head.push_str(&format!("Authorization: Bearer {t}\r\n"));
    }
    if let Some(ct) = content_type {
        head.push_str(&format!("Content-Type: {ct}\r\n"));
    }
    head.push_str("\r\n");
    stream.write_all(head.as_bytes()).and_then(|_| stream.write_all(body)).map_err(|e| e.to_string())?;
    let mut resp = Vec::new();
    stream.read_to_end(&mut resp).map_err(|e| e.to_string())?;
    let split = resp.windows(4).position(|w| w == b"\r\n\r\n").ok_or("malformed response")?;
    let status_line = String::from_utf8_lossy(&resp[..split]).lines().next().unwrap_or("").to_string();
    let code = status_line.split(' ').nth(1).and_then(|c| c.parse().ok()).ok_or(format!("bad status line {status_line}"))?;
    let head = String::from_utf8_lossy(&resp[..split]).to_ascii_lowercase();
    let mut body = resp[split + 4..].to_vec();
    if head.contains("transfer-encoding: chunked") {
        body = dechunk(&body);
    }
    Ok((code, body))
}

fn dechunk(mut data: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    while let Some(end) = data.windows(2).position(|w| w == b"\r\n") {
        let size = usize::from_str_radix(String::from_utf8_lossy(&data[..end]).trim(), 16).unwrap_or(0);
        if size == 0 {
            break;
        }
        out.extend(&data[end + 2..end + 2 + size]);
        data = &data[end + 4 + size..];
    }
    out
}

fn login(addr: &str, user: &str, password: &str) -> Result<String, String> {
    let body = serde_json::json!({"user": user, "password": password}).to_string();
    let (code, resp) = http(addr, "POST", "/login", None, Some("application/json"), body.as_bytes())?;
    check(code == 200, || format!("login {user}: {code}"))?;
    let v: serde_json::Value = serde_json::from_slice(&resp).map_err(|e| e.to_string())?;
    Ok(v["token"].as_str().ok_or("no token")?.to_string())
}

fn submit(addr: &str, token: &str, name: &str, text: &str) -> Result<String, String> {
    let boundary = "acceptance-boundary";
    let body = format!(
        "--{boundary}\r\nContent-Disposition: form-data; name=\"spec\"\r\n\r\n{{\"file_type\": \"txt\", \"pipeline\": \"text\"}}\r\n\
         --{boundary}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"{name}\"\r\n\r\n{text}\r\n--{boundary}--\r\n"
    );
    let (code, resp) = http(addr, "POST", "/jobs", Some(token), Some(&format!("multipart/form-data; boundary={boundary}")), body.as_bytes())?;
    check(code == 202, || format!("submit {name}: {code} {}", String::from_utf8_lossy(&resp)))?;
    let v: serde_json::Value = serde_json::from_slice(&resp).map_err(|e| e.to_string())?;
    Ok(v["id"].as_str().ok_or("no id")?.to_string())
}

fn service_lifecycle() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = ServiceConfig {
        data_dir: dir.path().to_path_buf(),
        workers: 3,
        users: BTreeMap::from([("alice".into(), "alice-pw".into()), ("bob".into(), "bob-pw".into())]),
        ..ServiceConfig::default()
    };
    let runner = Arc::new(Instrumented {
        inner: ExtractorRunner::new(Extractor::new(PipelineConfig::default())),
        runs: Mutex::new(BTreeMap::new()),
    });
    let service = Service::with_runner(config, runner.clone()).map_err(|e| e.to_string())?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let listener = runtime.block_on(refscan_service::bind("127.0.0.1:0")).map_err(|e| e.to_string())?;
    let addr = listener.local_addr().map_err(|e| e.to_string())?.to_string();
    let stop = Arc::new(AtomicBool::new(false));
    let stop_flag = Arc::clone(&stop);
    let (done_tx, done_rx) = std::sync::mpsc::channel();
    let server = std::thread::spawn(move || {
        runtime.block_on(async move {
            let shutdown = async move {
                while !stop_flag.load(Ordering::Acquire) {
                    tokio::time::sleep(Duration::from_millis(20)).await;
                }
            };
            let r = refscan_service::serve(service, listener, shutdown).await;
            let _ = done_tx.send(r.map_err(|e| e.to_string()));
        })
    });

    let result = (|| -> Outcome {
        let alice = login(&addr, "alice", "alice-pw")?;
        let bob = login(&addr, "bob", "bob-pw")?;
        let text = "References\n[1] A. Smith. One title. Journal X, 1999.\n[2] B. Doe. Two title. Journal Y, 2001.\n";
        let mut ids = Vec::new();
        for i in 0..50 {
            ids.push(submit(&addr, &alice, &format!("job-{i}.txt"), text)?);
        }
        let throwing = submit(&addr, &alice, "throw-1.txt", text)?;
        let after = submit(&addr, &alice, "after-throw.txt", text)?;
        let bobs = submit(&addr, &bob, "bob.txt", text)?;

        let deadline = Instant::now() + Duration::from_secs(120);
        let status = |id: &str, token: &str| -> Result<String, String> {
            let (code, body) = http(&addr, "GET", &format!("/jobs/{id}"), Some(token), None, b"")?;
            check(code == 200, || format!("status {id}: {code}"))?;
            let v: serde_json::Value = serde_json::from_slice(&body).map_err(|e| e.to_string())?;
            Ok(v["status"].as_str().unwrap_or("").to_string())
        };
        loop {
            let mut pending = 0;
            for id in ids.iter().chain([&throwing, &after]) {
                let s = status(id, &alice)?;
                if s == "queued" || s == "processing" {
                    pending += 1;
                }
            }
            if pending == 0 {
                break;
            }
            check(Instant::now() < deadline, || format!("{pending} jobs still pending"))?;
            std::thread::sleep(Duration::from_millis(50));
        }
        for id in &ids {
            check(status(id, &alice)? == "done", || format!("job {id} not done"))?;
            let (code, xml) = http(&addr, "GET", &format!("/jobs/{id}/result.xml"), Some(&alice), None, b"")?;
            check(code == 200 && xml.starts_with(b"<?xml"), || format!("result of {id}: {code}"))?;
        }
        check(status(&throwing, &alice)? == "failed", || "throwing job did not fail".into())?;
        check(status(&after, &alice)? == "done", || "queue stalled after the throwing job".into())?;
        let (code, _) = http(&addr, "GET", &format!("/jobs/{throwing}/result.xml"), Some(&alice), None, b"")?;
        check(code == 409, || format!("failed job result answered {code}"))?;

        let runs = runner.runs.lock().unwrap().clone();
        let once = (0..50).all(|i| runs.get(&format!("job-{i}.txt")) == Some(&1));
        check(once && runs.values().all(|&n| n == 1), || format!("run counts {runs:?}"))?;

        let mut probes = 0;
        let mut leaks = 0;
        let mut probe = |id: &str, token: &str| -> Result<(), String> {
            for path in [format!("/jobs/{id}"), format!("/jobs/{id}/result.xml"), format!("/jobs/{id}/overlay/1.png")] {
                let (code, _) = http(&addr, "GET", &path, Some(token), None, b"")?;
                probes += 1;
                if code != 404 {
                    leaks += 1;
                }
            }
            Ok(())
        };
        for id in ids.iter().chain([&throwing, &after]) {
            probe(id, &bob)?;
        }
        probe(&bobs, &alice)?;
        let (_, list) = http(&addr, "GET", "/jobs", Some(&bob), None, b"")?;
        let listed: serde_json::Value = serde_json::from_slice(&list).map_err(|e| e.to_string())?;
        check(listed.as_array().map(Vec::len) == Some(1), || format!("bob sees {listed}"))?;
        check(leaks == 0, || format!("{leaks} of {probes} cross-user probes were not 404"))?;
        Ok(format!(
            "3 workers x 50 jobs each run exactly once; throwing job failed, later job done; {probes}/{probes} cross-user probes not-found"
        ))
    })();

    stop.store(true, Ordering::Release);
    let served = done_rx.recv_timeout(Duration::from_secs(30)).map_err(|e| e.to_string())?;
    server.join().map_err(|_| "server thread panicked".to_string())?;
    served?;
    result
}

fn main() {
    // Panics inside jobs are expected in the service check; keep their
    // messages out of the report.
    std::panic::set_hook(Box::new(|_| {}));
    let criteria: [(&str, Criterion); 9] = [
        ("metric-oracle", metric_oracle),
        ("distance-transform-oracle", distance_oracle),
        ("otsu-oracle", otsu_oracle),
        ("gt-identity", gt_identity),
        ("ablation-shape", ablation_shape),
        ("synthetic-end-to-end", synthetic_end_to_end),
        ("xml-round-trip", xml_round_trip),
        ("ensemble-conservation", ensemble_conservation),
        ("service-lifecycle", service_lifecycle),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} [{secs:.1} s]"),
            Err(reason) => {
                failed += 1;
                println!("FAIL {name}: {reason} [{secs:.1} s]");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
