//! Brute-force cascaded-gain oracle written directly from the channel model,
//! without any of the library's link or pattern helpers.

use std::f64::consts::PI;

use rissim::geometry::Vec3;

use super::Geometry;

const C: f64 = 299_792_458.0;

type V = [f64; 3];

fn v(p: Vec3) -> V {
    [p.x, p.y, p.z]
}

fn sub(a: V, b: V) -> V {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: V, b: V) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: V) -> f64 {
    dot(a, a).sqrt()
}

/// Antenna axes: boresight, horizontal and vertical for an azimuth and a downtilt.
fn axes(az_deg: f64, tilt_deg: f64) -> (V, V, V) {
    let (a, t) = (az_deg.to_radians(), tilt_deg.to_radians());
    (
        [a.cos() * t.cos(), a.sin() * t.cos(), -t.sin()],
        [-a.sin(), a.cos(), 0.0],
        [a.cos() * t.sin(), a.sin() * t.sin(), t.cos()],
    )
}

/// Parametric element gain in dBi toward `d` from an antenna with the given axes.
fn gain_dbi(d: V, ax: (V, V, V), peak: f64, hpbw_h: f64, hpbw_v: f64) -> f64 {
    let n = norm(d);
    let phi = dot(d, ax.1).atan2(dot(d, ax.0)).to_degrees();
    let theta = (dot(d, ax.2) / n).clamp(-1.0, 1.0).asin().to_degrees();
    let av = (12.0 * (theta / hpbw_v).powi(2)).min(30.0);
    let ah = (12.0 * (phi / hpbw_h).powi(2)).min(30.0);
    peak - (av + ah).min(30.0)
}

/// Urban-macro pathloss in dB.
fn pathloss(d3: f64, d2: f64, fc: f64, h_hi: f64, h_lo: f64, los: bool) -> f64 {
    let d3 = d3.max(1.0);
    let bp = 4.0 * (h_hi - 1.0).max(0.0) * (h_lo - 1.0).max(0.0) * fc * 1e9 / C;
    let l = if d2 <= bp {
        28.0 + 22.0 * d3.log10() + 20.0 * fc.log10()
    } else {
        28.0 + 40.0 * d3.log10() + 20.0 * fc.log10() - 9.0 * (bp * bp + (h_hi - h_lo).powi(2)).log10()
    };
    if los {
        l
    } else {
        l.max(13.54 + 39.08 * d3.log10() + 20.0 * fc.log10() - 0.6 * (h_lo - 1.5))
    }
}

/// Linear cascaded power gain: double loop over the element grid, each
/// element's hop distances, angles and pathlosses evaluated from scratch.
pub fn cascaded_power(g: &Geometry, near_field_exact: bool) -> f64 {
    let p = &g.panel;
    let fc = g.fc_ghz;
    let lambda = C / (fc * 1e9);
    let k = 2.0 * PI / lambda;
    let dx = 0.4 * lambda;
    let ax = axes(p.placement.azimuth_deg, p.placement.tilt_deg);
    let c = v(p.placement.position);
    let bs = v(g.bs.position);
    let ue = v(g.ue.position);
    let levels = 1u32 << p.bits;
    let hop = |from: V, to: V, los: bool| -> f64 {
        let d = sub(to, from);
        let (hi, lo) = if to[2] >= c[2] { (to[2], c[2]) } else { (c[2], to[2]) };
        let pl = pathloss(norm(d), (d[0] * d[0] + d[1] * d[1]).sqrt(), fc, hi, lo, los);
        10f64.powf((gain_dbi(d, ax, 5.0, 65.0, 65.0) - pl) / 20.0)
    };
    let (mut re, mut im) = (0.0, 0.0);
    for r in 0..p.rows {
        for q in 0..p.cols {
            let ov = (r as f64 - (p.rows as f64 - 1.0) / 2.0) * dx;
            let oh = (q as f64 - (p.cols as f64 - 1.0) / 2.0) * dx;
            let e = [
                c[0] + ax.1[0] * oh + ax.2[0] * ov,
                c[1] + ax.1[1] * oh + ax.2[1] * ov,
                c[2] + ax.1[2] * oh + ax.2[2] * ov,
            ];
            let (from_inc, from_out) = if near_field_exact { (e, e) } else { (c, c) };
            let amp = hop(from_inc, bs, g.bs_ris.los) * hop(from_out, ue, g.ris_ue.los);
            let st = &p.states[r * p.cols + q];
            let idx = if st.failed { st.failed_index } else { st.index };
            let phase = k * (norm(sub(bs, e)) + norm(sub(ue, e))) + 2.0 * PI * idx as f64 / levels as f64;
            re += amp * phase.cos();
            im += amp * phase.sin();
        }
    }
    let (bax_b, bax_h, bax_v) = axes(g.bs.azimuth_deg, g.bs.tilt_deg + 4.0);
    let g_bs = gain_dbi(sub(c, bs), (bax_b, bax_h, bax_v), 17.0, 65.0, 10.0);
    let scalar = 10f64.powf((g_bs - g.bs_ris.shadow_db - g.ris_ue.shadow_db) / 10.0);
    (re * re + im * im) * scalar
}

/// Element positions as the oracle lays them out.
pub fn element_positions(g: &Geometry) -> Vec<V> {
    let p = &g.panel;
    let dx = 0.4 * C / (g.fc_ghz * 1e9);
    let ax = axes(p.placement.azimuth_deg, p.placement.tilt_deg);
    let c = v(p.placement.position);
    let mut out = Vec::new();
    for r in 0..p.rows {
        for q in 0..p.cols {
            let ov = (r as f64 - (p.rows as f64 - 1.0) / 2.0) * dx;
            let oh = (q as f64 - (p.cols as f64 - 1.0) / 2.0) * dx;
            out.push([c[0] + ax.1[0] * oh + ax.2[0] * ov, c[1] + ax.1[1] * oh + ax.2[1] * ov, c[2] + ax.1[2] * oh + ax.2[2] * ov]);
        }
    }
    out
}
