//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs the full-scale scenarios, so expect several minutes.

mod common;

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rissim::cascaded::{cascaded_gain, CascadeContext};
use rissim::config::{PanelSharing, ScenarioConfig};
use rissim::engine::{run_drop, DropResult, InterferenceFlags, NetworkDrop};
use rissim::geometry::{build_layout, Placement};
use rissim::output::{write_drop_outputs, write_heatmap_csv};
use rissim::radio::{lin_to_db, PatternParams, RadioModel};
use rissim::ris::{
    inject_failures, panel_beam_pattern, quantized_conjugate, rayleigh_distance, steered_panel, PatternCut, RisPanel,
};
use rissim::rng::{stream_rng, Stream};
use rissim::stats::{cdf, mean};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Drops keyed by (config JSON, seed) so scenarios shared between criteria run once.
#[derive(Default)]
struct Drops {
    cache: HashMap<(String, u64), DropResult>,
}

impl Drops {
    fn get(&mut self, cfg: &ScenarioConfig, seed: u64) -> &DropResult {
        let key = (cfg.to_json_pretty(), seed);
        self.cache.entry(key).or_insert_with(|| run_drop(cfg, seed).expect("drop runs"))
    }
}

fn median(xs: &[f64]) -> f64 {
    cdf(xs).unwrap().median()
}

fn mean_db_of_linear(xs: &[f64]) -> f64 {
    lin_to_db(mean(&xs.iter().map(|x| 10f64.powf(x / 10.0)).collect::<Vec<_>>()))
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn panel(n: usize) -> RisPanel {
    steered_panel(n, n, 2.6, PatternParams::ris_element(5.0), 2, 0.0, 0.0)
}

fn closed_form_geometry() -> Outcome {
    let (p16, p40) = (panel(16), panel(40));
    let (a16, a40) = (p16.area_m2(), p40.area_m2());
    let (r16, r40) = (rayleigh_distance(&p16, 2.6), rayleigh_distance(&p40, 2.6));
    let pass = within(a16 / 0.545, 1.0, 0.01)
        && within(a40 / 3.41, 1.0, 0.01)
        && within(r16 / 19.0, 1.0, 0.02)
        && within(r40 / 118.0, 1.0, 0.02);
    outcome(
        pass,
        format!("areas {a16:.4} / {a40:.3} m² (0.545 / 3.41 ±1%), Rayleigh {r16:.2} / {r40:.1} m (19 / 118 ±2%)"),
    )
}

fn coherent_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for n in [4usize, 256, 1600] {
        // Unit terms whose phases sit on the 2-bit levels can be phased exactly.
        let terms: Vec<Complex64> =
            (0..n).map(|_| Complex64::from_polar(1.0, -PI / 2.0 * rng.random_range(0..4) as f64)).collect();
        let p = quantized_conjugate(&terms, 2).1.norm_sqr();
        let rel = (p / (n * n) as f64 - 1.0).abs();
        worst = worst.max(rel);
        parts.push(format!("N={n}: {p:.6}"));
    }
    outcome(worst < 1e-12, format!("{} (max rel. error {worst:.1e})", parts.join(", ")))
}

fn quantization_loss() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let terms: Vec<Complex64> = (0..10_000).map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI))).collect();
    let p = quantized_conjugate(&terms, 2).1.norm_sqr() / 1e8;
    let loss = -lin_to_db(p);
    let analytic = -lin_to_db((f64::sin(PI / 4.0) / (PI / 4.0)).powi(2));
    outcome(
        within(loss, 0.91, 0.05),
        format!("2-bit loss {loss:.3} dB over 10^4 random phases (analytic {analytic:.3}, target 0.91 ±0.05)"),
    )
}

fn boresight_hpbw(n: usize, cut: PatternCut) -> f64 {
    let p = panel(n);
    let grid: Vec<f64> = (-3000..=3000).map(|i| i as f64 * 0.01).collect();
    panel_beam_pattern(&p, p.frame().boresight, cut, 0.0, &grid, 2.6).hpbw_deg.unwrap()
}

fn beamwidths() -> Outcome {
    let (h16, h40) = (boresight_hpbw(16, PatternCut::Azimuth), boresight_hpbw(40, PatternCut::Azimuth));
    let (v16, v40) = (boresight_hpbw(16, PatternCut::Elevation), boresight_hpbw(40, PatternCut::Elevation));
    outcome(
        within(h16, 7.4, 1.5) && within(h40, 2.6, 1.0),
        format!("HPBW {h16:.2}° (7.4 ±1.5) and {h40:.2}° (2.6 ±1.0); elevation cuts {v16:.2}° / {v40:.2}°"),
    )
}

fn failure_robustness() -> Outcome {
    let step = 0.05;
    let grid: Vec<f64> = (-1800..=1800).map(|i| i as f64 * step).collect();
    let mut ok_margin = 0;
    let mut shifted = 0;
    let mut worst = f64::INFINITY;
    for draw in 0..100u64 {
        let mut p = panel(40);
        inject_failures(&mut p, 0.1, &mut stream_rng(draw, Stream::Failure, 0, 0));
        let bp = panel_beam_pattern(&p, p.frame().boresight, PatternCut::Azimuth, 0.0, &grid, 2.6);
        worst = worst.min(bp.sidelobe_margin_db);
        ok_margin += usize::from(bp.sidelobe_margin_db >= 7.0);
        shifted += usize::from(bp.peak_angle_deg.abs() > step + 1e-9);
    }
    outcome(
        ok_margin >= 90 && shifted == 0,
        format!(
            "40x40 at 10% failures: margin ≥ 7 dB in {ok_margin}/100 draws (worst {worst:.1} dB), \
             peak shifted beyond {step}° in {shifted}/100"
        ),
    )
}

fn cascaded_oracle() -> Outcome {
    let layout = build_layout(0, 5000.0).unwrap();
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let g = common::random_geometry(seed, 3, 3);
        let model = RadioModel { fc_ghz: g.fc_ghz, ris_pattern: PatternParams::ris_element(5.0), shadowing: true };
        let ctx = CascadeContext { layout: &layout, model: &model, near_field_exact: true };
        let lib = cascaded_gain(&g.bs, &g.panel, &g.ue, g.bs_ris, g.ris_ue, &ctx).power;
        let want = common::oracle::cascaded_power(&g, true);
        worst = worst.max(((lib - want) / want).abs());
    }
    outcome(worst < 1e-9, format!("3x3 panel, 100 random geometries, max rel. error {worst:.1e} (< 1e-9)"))
}

fn grid(n: usize) -> ScenarioConfig {
    ScenarioConfig { panel_grid: n, ..ScenarioConfig::default() }
}

fn pairing_distances(drops: &mut Drops) -> Outcome {
    let seed = 1;
    let mut readings = Vec::new();
    for thr in [3.0, -3.0] {
        let mut meds = Vec::new();
        for (n, target) in [(16, 37.0), (40, 59.0)] {
            let cfg = ScenarioConfig { pairing_threshold_db: thr, ..grid(n) };
            let d = drops.get(&cfg, seed).ris_distances();
            meds.push((n, target, median(&d), d.len()));
        }
        let err = meds.iter().map(|m| (m.2 - m.1).abs()).fold(0.0, f64::max);
        readings.push((thr, meds, err));
    }
    let best = readings.iter().min_by(|a, b| a.2.total_cmp(&b.2)).unwrap();
    let text: Vec<String> = readings
        .iter()
        .map(|(thr, meds, _)| {
            let m: Vec<String> =
                meds.iter().map(|(n, t, m, k)| format!("{n}x{n} {m:.1} m (target {t}, {k} paired)")).collect();
            format!("threshold {thr:+} dB: {}", m.join(", "))
        })
        .collect();
    outcome(best.2 <= 15.0, format!("seed {seed}; {}; better reading {:+} dB (±15 m)", text.join("; "), best.0))
}

/// Cell-edge UEs, panels of the given count and size.
fn deployment(panels: usize, n: usize) -> ScenarioConfig {
    ScenarioConfig { panels_per_sector: panels, panel_grid: n, ue_placement: Placement::CellEdge, ..ScenarioConfig::default() }
}

fn pooled(drops: &mut Drops, cfg: &ScenarioConfig, seeds: &[u64]) -> (Vec<f64>, Vec<f64>) {
    let (mut with, mut without) = (Vec::new(), Vec::new());
    for &s in seeds {
        let r = drops.get(cfg, s);
        with.extend(r.sinr());
        without.extend(r.baseline_sinr());
    }
    (with, without)
}

const POOL: [u64; 3] = [1, 2, 3];

fn sinr_gain(drops: &mut Drops) -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for (panels, target) in [(4, 4.0), (8, 7.0)] {
        let (with, without) = pooled(drops, &deployment(panels, 40), &POOL);
        let lin = mean_db_of_linear(&with) - mean_db_of_linear(&without);
        let db = mean(&with) - mean(&without);
        pass &= within(lin, target, 2.0);
        parts.push(format!("{panels}x40x40 {lin:.2} dB (target {target} ±2; mean-of-dB {db:.2})"));
    }
    outcome(pass, format!("mean SINR gain over no-RIS, seeds 1-3, cell-edge UEs: {}", parts.join(", ")))
}

fn deployment_ordering(drops: &mut Drops) -> Outcome {
    let (big, _) = pooled(drops, &deployment(4, 40), &POOL);
    let (many, _) = pooled(drops, &deployment(24, 16), &POOL);
    let (mb, mm) = (median(&big), median(&many));
    outcome(
        mb > mm,
        format!("full scale, seeds 1-3: median SINR 4x40x40 {mb:.2} dB vs 24x16x16 {mm:.2} dB"),
    )
}

fn deployment_ordering_smoke() -> Outcome {
    let t = Instant::now();
    let seeds: Vec<u64> = (1..=20).collect();
    let mut meds = Vec::new();
    for (panels, n) in [(4, 40), (24, 16)] {
        let cfg = ScenarioConfig { rings: 0, ..deployment(panels, n) };
        let mut all = Vec::new();
        for &s in &seeds {
            all.extend(run_drop(&cfg, s).unwrap().sinr());
        }
        meds.push(median(&all));
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        meds[0] > meds[1] && secs < 120.0,
        format!("0-ring, 20 seeds: median SINR 4x40x40 {:.2} dB vs 24x16x16 {:.2} dB in {secs:.0} s (< 120 s)", meds[0], meds[1]),
    )
}

fn cross_ris(drops: &mut Drops) -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for n in [16, 40] {
        let on = drops.get(&grid(n), 1).clone();
        let off = drops.get(&ScenarioConfig { cross_ris_interference: false, ..grid(n) }, 1).clone();
        let d = median(&off.sinr()) - median(&on.sinr());
        let violations = on.ues.iter().zip(&off.ues).filter(|(a, b)| b.sinr_db < a.sinr_db).count();
        let consistent = on.sinr_with(InterferenceFlags::new(false)) == off.sinr();
        pass &= d.abs() < 1.0 && violations == 0 && consistent;
        parts.push(format!("{n}x{n}: median off-on {d:.3} dB, {violations} UEs with off < on"));
    }
    outcome(pass, format!("seed 1: {}", parts.join("; ")))
}

fn failure_sweep(drops: &mut Drops) -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for n in [16, 40] {
        let base = median(&drops.get(&grid(n), 1).sinr());
        let mut shifts = Vec::new();
        for rate in [0.05, 0.1] {
            let m = median(&drops.get(&ScenarioConfig { failure_rate: rate, ..grid(n) }, 1).sinr());
            shifts.push(m - base);
        }
        pass &= shifts.iter().all(|s| s.abs() < 1.0);
        parts.push(format!("{n}x{n}: median {base:.2} dB, shifts {:+.3} / {:+.3} dB", shifts[0], shifts[1]));
    }
    outcome(pass, format!("seed 1, rates 0/5/10%: {}", parts.join("; ")))
}

fn heat_map() -> Outcome {
    let cfg = ScenarioConfig::default();
    let drop = NetworkDrop::prepare(&cfg, 1).unwrap();
    let map = drop.heatmap(cfg.heatmap_step_m, None).unwrap();
    let covered: Vec<f64> = map.iter().map(|p| p.gain_db).filter(|&g| g != 0.0).collect();
    let in_band = covered.iter().filter(|&&g| (3.0..=13.0).contains(&g)).count();
    let frac = in_band as f64 / covered.len().max(1) as f64;
    let negative = map.iter().filter(|p| p.gain_db < 0.0).count();
    // A paired point gains at least 10·log10(1 + 10^(threshold/10)).
    let floor = lin_to_db(1.0 + 10f64.powf(cfg.pairing_threshold_db / 10.0));
    let min = covered.iter().cloned().fold(f64::INFINITY, f64::min);
    let c = cdf(&covered).unwrap();
    outcome(
        frac >= 0.9 && negative == 0 && min >= floor - 1e-9,
        format!(
            "{} points, {} covered; {:.1}% of covered in [3, 13] dB (need 90%); \
             covered quantiles 5/50/95% = {:.1}/{:.1}/{:.1} dB, min {min:.2} dB (floor {floor:.2}); \
             uncovered all exactly 0 dB",
            map.len(),
            covered.len(),
            100.0 * frac,
            c.quantile(0.05),
            c.median(),
            c.quantile(0.95),
        ),
    )
}

fn determinism() -> Outcome {
    let cfg = ScenarioConfig { panel_sharing: PanelSharing::TimeShared, failure_rate: 0.05, ..ScenarioConfig::default() };
    let tmp = tempfile::tempdir().unwrap();
    let mut files: Vec<Vec<(String, Vec<u8>)>> = Vec::new();
    for threads in [1, 4, 8] {
        let dir = tmp.path().join(format!("t{threads}"));
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let drop = NetworkDrop::prepare(&cfg, 9).unwrap();
            write_drop_outputs(&dir, &drop.evaluate(), true).unwrap();
            let map = drop.heatmap(25.0, None).unwrap();
            write_heatmap_csv(fs::File::create(dir.join("heatmap.csv")).unwrap(), &map).unwrap();
        });
        let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(&dir)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
            })
            .collect();
        v.sort();
        files.push(v);
    }
    let same = files[1] == files[0] && files[2] == files[0];
    let names: Vec<&str> = files[0].iter().map(|f| f.0.as_str()).collect();
    outcome(same, format!("seed 9, threads 1/4/8: {} byte-identical: {same}", names.join(", ")))
}

fn main() -> ExitCode {
    let mut drops = Drops::default();
    let mut results = Vec::new();
    let mut run = |name: &str, f: &mut dyn FnMut(&mut Drops) -> Outcome| {
        let t = Instant::now();
        let o = f(&mut drops);
        let line = format!(
            "{} {name}: {} [{:.1} s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
        println!("{line}");
        results.push(o.pass);
    };
    println!("acceptance suite");
    run("closed-form geometry", &mut |_| closed_form_geometry());
    run("coherent-sum identity", &mut |_| coherent_identity());
    run("quantization loss", &mut |_| quantization_loss());
    run("beamwidths", &mut |_| beamwidths());
    run("failure robustness", &mut |_| failure_robustness());
    run("cascaded oracle", &mut |_| cascaded_oracle());
    run("pairing distances", &mut pairing_distances);
    run("SINR gain vs deployment", &mut sinr_gain);
    run("deployment ordering", &mut deployment_ordering);
    run("deployment ordering (0-ring smoke)", &mut |_| deployment_ordering_smoke());
    run("cross-RIS interference", &mut cross_ris);
    run("failure-rate sweep", &mut failure_sweep);
    run("heat map", &mut |_| heat_map());
    run("determinism", &mut |_| determinism());
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
