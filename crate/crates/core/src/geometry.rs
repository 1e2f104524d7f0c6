//! Hexagonal multi-cell layout, wrap-around and random node drops.

use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

pub const BS_HEIGHT_M: f64 = 25.0;
pub const RIS_HEIGHT_M: f64 = 15.0;
pub const UE_HEIGHT_M: f64 = 1.5;
pub const RIS_DOWNTILT_DEG: f64 = 10.0;
pub const MIN_UE_BS_DISTANCE_M: f64 = 35.0;
pub const MIN_PANEL_SPACING_M: f64 = 25.0;
/// Upper bound on rejected positions while placing one panel.
pub const MAX_PANEL_RESAMPLES: usize = 10_000;
/// Rejected draws after which a sector's panels are relocated.
pub const PANEL_JAM_TRIES: usize = 250;
const RELOCATION_SWEEPS: usize = 20;
const RELOCATION_STEP_M: f64 = 4.0;
/// Azimuth of sector 0; the other two sectors follow at +120° and +240°.
pub const SECTOR_REFERENCE_DEG: f64 = 30.0;
/// Half width of a sector wedge.
pub const SECTOR_HALF_WIDTH_DEG: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_polar(r: f64, azimuth_deg: f64) -> Self {
        let a = azimuth_deg.to_radians();
        Self::new(r * a.cos(), r * a.sin())
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    /// Azimuth in degrees, counter-clockwise from +x.
    pub fn azimuth_deg(self) -> f64 {
        self.y.atan2(self.x).to_degrees()
    }

    pub fn with_z(self, z: f64) -> Vec3 {
        Vec3::new(self.x, self.y, z)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        self * (1.0 / self.norm())
    }

    pub fn xy(self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Orthonormal frame of an antenna or panel: boresight, horizontal and
/// vertical axes, after applying down-tilt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub boresight: Vec3,
    pub horizontal: Vec3,
    pub vertical: Vec3,
}

impl Frame {
    pub fn new(azimuth_deg: f64, downtilt_deg: f64) -> Self {
        let (sa, ca) = azimuth_deg.to_radians().sin_cos();
        let (st, ct) = downtilt_deg.to_radians().sin_cos();
        Self {
            boresight: Vec3::new(ca * ct, sa * ct, -st),
            horizontal: Vec3::new(-sa, ca, 0.0),
            vertical: Vec3::new(ca * st, sa * st, ct),
        }
    }

    /// Azimuth and elevation offsets (degrees) of `dir` from boresight.
    pub fn local_angles(&self, dir: Vec3) -> (f64, f64) {
        let n = dir.norm();
        if n == 0.0 {
            return (0.0, 0.0);
        }
        let x = dir.dot(self.boresight);
        let y = dir.dot(self.horizontal);
        let z = (dir.dot(self.vertical) / n).clamp(-1.0, 1.0);
        (y.atan2(x).to_degrees(), z.asin().to_degrees())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub id: usize,
    pub site: usize,
    pub azimuth_deg: f64,
}

/// Site/sector geometry of the network with its wrap-around shifts.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub rings: u32,
    pub isd: f64,
    pub sites: Vec<Vec2>,
    pub sectors: Vec<Sector>,
    /// Zero vector first, then the replica cluster shifts.
    pub wrap_shifts: Vec<Vec2>,
}

// Axial hex coordinates (i, j) -> i*u + j*v with u at 0° and v at 60°.
fn axial_to_xy(i: i64, j: i64, isd: f64) -> Vec2 {
    let (i, j) = (i as f64, j as f64);
    Vec2::new(isd * (i + 0.5 * j), isd * (3f64.sqrt() / 2.0) * j)
}

fn hex_distance(i: i64, j: i64) -> i64 {
    (i.abs() + j.abs() + (i + j).abs()) / 2
}

/// Builds a hexagonal layout of `num_rings` rings around a centre site.
pub fn build_layout(num_rings: u32, isd: f64) -> Result<Layout> {
    if num_rings > 2 {
        return Err(SimError::Config(format!(
            "ring count {num_rings} is not supported (expected 0, 1 or 2)"
        )));
    }
    if !(isd > 0.0 && isd.is_finite()) {
        return Err(SimError::Config(format!("inter-site distance {isd} must be positive")));
    }
    let n = num_rings as i64;
    let mut coords: Vec<(i64, i64)> = Vec::new();
    for i in -n..=n {
        for j in -n..=n {
            if hex_distance(i, j) <= n {
                coords.push((i, j));
            }
        }
    }
    coords.sort_by(|a, b| {
        let (pa, pb) = (axial_to_xy(a.0, a.1, 1.0), axial_to_xy(b.0, b.1, 1.0));
        let ka = (hex_distance(a.0, a.1), pa.azimuth_deg().rem_euclid(360.0));
        let kb = (hex_distance(b.0, b.1), pb.azimuth_deg().rem_euclid(360.0));
        ka.partial_cmp(&kb).unwrap()
    });
    let sites: Vec<Vec2> = coords.iter().map(|&(i, j)| axial_to_xy(i, j, isd)).collect();

    let sectors = (0..sites.len())
        .flat_map(|site| {
            (0..3).map(move |k| Sector {
                id: site * 3 + k,
                site,
                azimuth_deg: SECTOR_REFERENCE_DEG + 120.0 * k as f64,
            })
        })
        .collect();

    let mut wrap_shifts = vec![Vec2::ZERO];
    if n > 0 {
        // Cluster of 3n²+3n+1 sites tiles the plane with shift (n+1, n).
        let (mut i, mut j) = (n + 1, n);
        for _ in 0..6 {
            wrap_shifts.push(axial_to_xy(i, j, isd));
            (i, j) = (-j, i + j);
        }
    }

    Ok(Layout {
        rings: num_rings,
        isd,
        sites,
        sectors,
        wrap_shifts,
    })
}

impl Layout {
    /// Hexagon circumradius, ISD/√3.
    pub fn cell_radius(&self) -> f64 {
        self.isd / 3f64.sqrt()
    }

    pub fn num_sectors(&self) -> usize {
        self.sectors.len()
    }

    pub fn sector_site_position(&self, sector: usize) -> Vec2 {
        self.sites[self.sectors[sector].site]
    }

    /// Displacement from `a` to the nearest wrap replica of `b`.
    pub fn wrapped_displacement(&self, a: Vec2, b: Vec2) -> Vec2 {
        let mut best = b - a;
        let mut best_d = best.norm_sq();
        for &s in &self.wrap_shifts[1..] {
            let d = b + s - a;
            let dn = d.norm_sq();
            if dn < best_d {
                best = d;
                best_d = dn;
            }
        }
        best
    }

    pub fn wrapped_distance(&self, a: Vec2, b: Vec2) -> f64 {
        self.wrapped_displacement(a, b).norm()
    }

    /// Position of `b` as seen from `a`: same height, nearest horizontal replica.
    pub fn wrapped_position(&self, a: Vec3, b: Vec3) -> Vec3 {
        let d = self.wrapped_displacement(a.xy(), b.xy());
        Vec3::new(a.x + d.x, a.y + d.y, b.z)
    }

    /// Sector whose site is nearest (wrapped) and whose wedge contains `p`.
    pub fn sector_at(&self, p: Vec2) -> usize {
        let mut site = 0;
        let mut best = f64::INFINITY;
        for (k, &s) in self.sites.iter().enumerate() {
            let d = self.wrapped_distance(s, p);
            if d < best {
                best = d;
                site = k;
            }
        }
        let az = self.wrapped_displacement(self.sites[site], p).azimuth_deg();
        let mut choice = None;
        for k in 0..3 {
            let sector = &self.sectors[site * 3 + k];
            let off = wrap_deg(az - sector.azimuth_deg);
            if off.abs() <= SECTOR_HALF_WIDTH_DEG {
                choice = Some(sector.id);
                break;
            }
        }
        choice.unwrap_or(site * 3)
    }

    /// True when `p` lies inside the hexagonal cell of one of the sites (no
    /// wrap-around), i.e. within the area the layout actually covers.
    pub fn in_site_hexagon(&self, p: Vec2) -> bool {
        let apothem = self.isd / 2.0 + 1e-9;
        self.sites.iter().any(|&s| {
            let d = p - s;
            (0..3).all(|k| {
                let u = Vec2::from_polar(1.0, 60.0 * k as f64);
                (d.x * u.x + d.y * u.y).abs() <= apothem
            })
        })
    }

    /// True when `p` lies in the Voronoi region of one of the original sites,
    /// i.e. inside the simulated cluster rather than in a replica.
    pub fn in_cluster(&self, p: Vec2) -> bool {
        let direct = self
            .sites
            .iter()
            .map(|&s| (p - s).norm_sq())
            .fold(f64::INFINITY, f64::min);
        let wrapped = self
            .sites
            .iter()
            .map(|&s| self.wrapped_displacement(s, p).norm_sq())
            .fold(f64::INFINITY, f64::min);
        direct <= wrapped + 1e-9
    }
}

/// Wraps an angle in degrees into (-180, 180].
pub fn wrap_deg(a: f64) -> f64 {
    let w = (a + 180.0).rem_euclid(360.0) - 180.0;
    if w == -180.0 {
        180.0
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Bs,
    Ris,
    Ue,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Bs => "bs",
            NodeKind::Ris => "ris",
            NodeKind::Ue => "ue",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodePlacement {
    pub kind: NodeKind,
    pub id: usize,
    /// Owning (dropping) sector.
    pub sector: usize,
    pub position: Vec3,
    pub azimuth_deg: f64,
    /// Mechanical down-tilt.
    pub tilt_deg: f64,
}

impl NodePlacement {
    pub fn frame(&self) -> Frame {
        Frame::new(self.azimuth_deg, self.tilt_deg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    Uniform,
    CellEdge,
}

/// BS antenna placements, one per sector.
pub fn bs_placements(layout: &Layout) -> Vec<NodePlacement> {
    layout
        .sectors
        .iter()
        .map(|s| NodePlacement {
            kind: NodeKind::Bs,
            id: s.id,
            sector: s.id,
            position: layout.sites[s.site].with_z(BS_HEIGHT_M),
            azimuth_deg: s.azimuth_deg,
            tilt_deg: 0.0,
        })
        .collect()
}

fn sample_in_wedge<R: Rng + ?Sized>(
    rng: &mut R,
    sector: &Sector,
    radius: f64,
    placement: Placement,
    edge_band: (f64, f64),
) -> (f64, f64) {
    let az = sector.azimuth_deg + rng.random_range(-SECTOR_HALF_WIDTH_DEG..SECTOR_HALF_WIDTH_DEG);
    let r = match placement {
        Placement::Uniform => radius * rng.random::<f64>().sqrt(),
        Placement::CellEdge => radius * rng.random_range(edge_band.0..=edge_band.1),
    };
    (r, az)
}

fn panel_at(id: usize, sector: usize, site: Vec2, r: f64, az: f64) -> NodePlacement {
    NodePlacement {
        kind: NodeKind::Ris,
        id,
        sector,
        position: (site + Vec2::from_polar(r, az)).with_z(RIS_HEIGHT_M),
        azimuth_deg: wrap_deg(az + 180.0),
        tilt_deg: RIS_DOWNTILT_DEG,
    }
}

/// Which panels must keep [`MIN_PANEL_SPACING_M`] from each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpacingScope {
    /// Every pair in the wrapped cluster.
    Cluster,
    /// Pairs of panels served by the same site.
    Site,
}

/// Drops `per_sector` RIS panels in every sector.
///
/// Panels face their serving BS and keep at least 25 m (wrapped) from every
/// other panel. When that is infeasible (dense cell-edge drops crowd the
/// corners shared by three sites) the drop is redrawn with spacing enforced
/// only between panels of the same site, and a warning is logged.
pub fn drop_ris_panels<R: Rng + ?Sized>(
    layout: &Layout,
    per_sector: usize,
    placement: Placement,
    rng: &mut R,
) -> Result<Vec<NodePlacement>> {
    match drop_ris_panels_scoped(layout, per_sector, placement, SpacingScope::Cluster, rng) {
        Err(SimError::Drop(msg)) if layout.sites.len() > 1 => {
            log::warn!("{msg}; enforcing panel spacing per site instead");
            drop_ris_panels_scoped(layout, per_sector, placement, SpacingScope::Site, rng)
        }
        other => other,
    }
}

/// Panel drop with an explicit spacing scope.
///
/// Positions are drawn by rejection; once a sector jams (no free spot in
/// [`PANEL_JAM_TRIES`] draws) its panels are relocated by random local moves
/// that keep every constraint, which opens gaps for the next insertion. A
/// panel gets at most [`MAX_PANEL_RESAMPLES`] insertion draws.
pub fn drop_ris_panels_scoped<R: Rng + ?Sized>(
    layout: &Layout,
    per_sector: usize,
    placement: Placement,
    scope: SpacingScope,
    rng: &mut R,
) -> Result<Vec<NodePlacement>> {
    let radius = layout.cell_radius();
    let band = match placement {
        Placement::Uniform => (0.0, radius),
        Placement::CellEdge => (0.9 * radius, radius),
    };
    let total = per_sector * layout.num_sectors();
    let mut panels: Vec<NodePlacement> = Vec::with_capacity(total);
    for sector in &layout.sectors {
        let site = layout.sites[sector.site];
        let clear = |panels: &[NodePlacement], p: Vec2, skip: Option<usize>| {
            panels.iter().enumerate().all(|(i, q)| {
                Some(i) == skip
                    || (scope == SpacingScope::Site && layout.sectors[q.sector].site != sector.site)
                    || layout.wrapped_distance(q.position.xy(), p) >= MIN_PANEL_SPACING_M
            })
        };
        let base = panels.len();
        // Polar coordinates of this sector's panels around their site.
        let mut polar: Vec<(f64, f64)> = Vec::with_capacity(per_sector);
        for _ in 0..per_sector {
            let mut draws = 0usize;
            loop {
                let (r, az) = sample_in_wedge(rng, sector, radius, placement, (0.9, 1.0));
                if clear(&panels, site + Vec2::from_polar(r, az), None) {
                    panels.push(panel_at(panels.len(), sector.id, site, r, az));
                    polar.push((r, az));
                    break;
                }
                draws += 1;
                if draws >= MAX_PANEL_RESAMPLES {
                    return Err(SimError::Drop(format!(
                        "could not keep {MIN_PANEL_SPACING_M} m between panels: placed {} of {} \
                         after {MAX_PANEL_RESAMPLES} resamples (sector {}, {:?} placement)",
                        panels.len(),
                        total,
                        sector.id,
                        placement
                    )));
                }
                if draws % PANEL_JAM_TRIES == 0 {
                    for _ in 0..RELOCATION_SWEEPS {
                        for (k, (r, az)) in polar.iter_mut().enumerate() {
                            let nr = *r + rng.random_range(-RELOCATION_STEP_M..RELOCATION_STEP_M);
                            let naz = *az
                                + (rng.random_range(-RELOCATION_STEP_M..RELOCATION_STEP_M) / nr.max(1.0))
                                    .to_degrees();
                            let off = wrap_deg(naz - sector.azimuth_deg);
                            if nr < band.0 || nr > band.1 || off.abs() > SECTOR_HALF_WIDTH_DEG {
                                continue;
                            }
                            if clear(&panels, site + Vec2::from_polar(nr, naz), Some(base + k)) {
                                (*r, *az) = (nr, naz);
                                panels[base + k] = panel_at(base + k, sector.id, site, nr, naz);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(panels)
}

/// Drops `per_sector` outdoor UEs in every sector, at least 35 m from the site.
pub fn drop_ues<R: Rng + ?Sized>(
    layout: &Layout,
    per_sector: usize,
    placement: Placement,
    rng: &mut R,
) -> Result<Vec<NodePlacement>> {
    let radius = layout.cell_radius();
    let outer = match placement {
        Placement::Uniform => radius,
        Placement::CellEdge => 0.9 * radius,
    };
    if outer <= MIN_UE_BS_DISTANCE_M {
        return Err(SimError::Drop(format!(
            "UE area ends at {outer:.1} m, inside the {MIN_UE_BS_DISTANCE_M} m minimum UE distance"
        )));
    }
    let mut ues = Vec::with_capacity(per_sector * layout.num_sectors());
    for sector in &layout.sectors {
        let site = layout.sites[sector.site];
        for _ in 0..per_sector {
            let (r, az) = loop {
                let (r, az) = sample_in_wedge(rng, sector, radius, placement, (0.85, 0.9));
                if r >= MIN_UE_BS_DISTANCE_M {
                    break (r, az);
                }
            };
            ues.push(NodePlacement {
                kind: NodeKind::Ue,
                id: ues.len(),
                sector: sector.id,
                position: (site + Vec2::from_polar(r, az)).with_z(UE_HEIGHT_M),
                azimuth_deg: rng.random_range(-180.0..180.0),
                tilt_deg: 0.0,
            });
        }
    }
    Ok(ues)
}
