//! Node placement: one macrocell, houses on a square grid, devices dropped
//! around each house's fBS.

use dualband::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    MacroBs,
    MDevice,
    Fbs,
    SDevice,
    WDevice,
    Ap,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::MacroBs => "mBS",
            Role::MDevice => "mDevice",
            Role::Fbs => "fBS",
            Role::SDevice => "sDevice",
            Role::WDevice => "wDevice",
            Role::Ap => "AP",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub label: String,
    pub role: Role,
    pub x: f64,
    pub y: f64,
    pub house: Option<usize>,
}

impl Node {
    pub fn distance(&self, other: &Node) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyParams {
    pub with_macro: bool,
    pub macro_radius_m: f64,
    pub grid_pitch_m: f64,
    pub n_houses: usize,
    pub n_mdevices: usize,
    pub drop_radius_m: f64,
}

impl Default for TopologyParams {
    fn default() -> Self {
        TopologyParams {
            with_macro: true,
            macro_radius_m: 700.0,
            grid_pitch_m: 70.0,
            n_houses: 40,
            n_mdevices: 30,
            drop_radius_m: 20.0,
        }
    }
}

impl TopologyParams {
    /// One house and no macrocell.
    pub fn single_house() -> Self {
        TopologyParams { with_macro: false, n_houses: 1, n_mdevices: 0, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("macro_radius_m", self.macro_radius_m),
            ("grid_pitch_m", self.grid_pitch_m),
            ("drop_radius_m", self.drop_radius_m),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("topology.{name} must be positive, got {v}")));
            }
        }
        if self.n_houses == 0 {
            return Err(Error::Config("topology.n_houses must be at least 1".into()));
        }
        if !self.with_macro && self.n_mdevices > 0 {
            return Err(Error::Config("topology.n_mdevices needs with_macro".into()));
        }
        Ok(())
    }
}

/// Node ids of one house. Every house has an AP node; use cases that fold
/// the AP into the fBS ignore it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct House {
    pub center: (f64, f64),
    pub fbs: usize,
    pub sdevice: usize,
    pub wdevice: usize,
    pub ap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub nodes: Vec<Node>,
    pub houses: Vec<House>,
    pub mbs: Option<usize>,
    pub mdevices: Vec<usize>,
}

impl Topology {
    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }
}

fn grid_points(p: &TopologyParams) -> Vec<(f64, f64)> {
    // Houses keep their whole drop disk inside the macrocell. The mBS sits
    // at the origin, so with a macrocell the origin point is not a house.
    let bound = p.macro_radius_m - p.drop_radius_m;
    let n = (bound / p.grid_pitch_m).floor() as i64;
    let mut pts = vec![];
    for i in -n..=n {
        for j in -n..=n {
            let (x, y) = (i as f64 * p.grid_pitch_m, j as f64 * p.grid_pitch_m);
            if x.hypot(y) <= bound && !(p.with_macro && i == 0 && j == 0) {
                pts.push((x, y));
            }
        }
    }
    pts
}

fn drop_in_disk<R: Rng>(rng: &mut R, (cx, cy): (f64, f64), radius: f64) -> (f64, f64) {
    let r = radius * rng.gen::<f64>().sqrt();
    let a = rng.gen_range(0.0..std::f64::consts::TAU);
    (cx + r * a.cos(), cy + r * a.sin())
}

/// Deterministic layout for `seed`. House sites come from one stream and
/// each house's devices from their own, so changing `n_mdevices` leaves the
/// houses where they were.
pub fn build_topology(seed: u64, params: &TopologyParams) -> Result<Topology> {
    params.validate()?;
    let mut candidates = grid_points(params);
    if params.n_houses > candidates.len() {
        return Err(Error::Config(format!(
            "{} houses do not fit on {} grid points",
            params.n_houses,
            candidates.len()
        )));
    }
    let mut rng = substream(seed, "topology:houses");
    let (sites, _) = candidates.partial_shuffle(&mut rng, params.n_houses);
    let mut sites = sites.to_vec();
    // Stable house numbering independent of the shuffle order.
    sites.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let mut nodes = vec![];
    let mut push = |role: Role, label: String, (x, y): (f64, f64), house: Option<usize>| {
        let id = nodes.len();
        nodes.push(Node { id, label, role, x, y, house });
        id
    };
    let mbs = params.with_macro.then(|| push(Role::MacroBs, "mbs".into(), (0.0, 0.0), None));
    let mut houses = vec![];
    for (h, &center) in sites.iter().enumerate() {
        let mut rng = substream(seed, &format!("topology:house{h}"));
        let fbs = push(Role::Fbs, format!("h{h}/fbs"), center, Some(h));
        let sdevice = push(Role::SDevice, format!("h{h}/sdev"), drop_in_disk(&mut rng, center, params.drop_radius_m), Some(h));
        let wdevice = push(Role::WDevice, format!("h{h}/wdev"), drop_in_disk(&mut rng, center, params.drop_radius_m), Some(h));
        let ap = push(Role::Ap, format!("h{h}/ap"), drop_in_disk(&mut rng, center, params.drop_radius_m), Some(h));
        houses.push(House { center, fbs, sdevice, wdevice, ap });
    }
    let mut rng = substream(seed, "topology:mdevices");
    let mdevices = (0..params.n_mdevices)
        .map(|k| push(Role::MDevice, format!("m{k}"), drop_in_disk(&mut rng, (0.0, 0.0), params.macro_radius_m), None))
        .collect();
    Ok(Topology { nodes, houses, mbs, mdevices })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_bounds() {
        let p = TopologyParams::default();
        let a = build_topology(3, &p).unwrap();
        assert_eq!(a, build_topology(3, &p).unwrap());
        assert_ne!(a, build_topology(4, &p).unwrap());
        assert_eq!(a.houses.len(), 40);
        assert_eq!(a.mdevices.len(), 30);
        for &m in &a.mdevices {
            let n = a.node(m);
            assert!(n.x.hypot(n.y) <= 700.0);
        }
        for h in &a.houses {
            let f = a.node(h.fbs);
            for d in [h.sdevice, h.wdevice, h.ap] {
                assert!(a.node(d).distance(f) <= 20.0);
            }
            // grid points
            assert_eq!((h.center.0 / 70.0).fract(), 0.0);
            assert_eq!((h.center.1 / 70.0).fract(), 0.0);
        }
    }

    #[test]
    fn single_house() {
        let t = build_topology(1, &TopologyParams::single_house()).unwrap();
        assert_eq!(t.houses.len(), 1);
        assert!(t.mbs.is_none() && t.mdevices.is_empty());
        assert_eq!(t.nodes.len(), 4);
    }

    #[test]
    fn too_many_houses() {
        let p = TopologyParams { n_houses: 10_000, ..Default::default() };
        assert!(matches!(build_topology(1, &p), Err(Error::Config(_))));
    }

    #[test]
    fn mdevice_count_does_not_move_houses() {
        let a = build_topology(9, &TopologyParams::default()).unwrap();
        let b = build_topology(9, &TopologyParams { n_mdevices: 5, ..Default::default() }).unwrap();
        assert_eq!(a.houses, b.houses);
    }
}
