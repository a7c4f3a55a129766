//! Distance-based path loss per link class.

use dualband::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::topology::{Node, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkClass {
    /// mBS and mDevice.
    Macro,
    /// Macrocell node and small cell node, through one outer wall.
    MacroSmall,
    /// Two nodes in the same house.
    Indoor,
    /// Small cell or WLAN nodes in different houses, two outer walls.
    CrossHouse,
}

/// `intercept + slope·log10(R) + linear·R + wall`, R in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLossLaw {
    pub intercept_db: f64,
    pub slope_db: f64,
    pub linear_db_per_m: f64,
    pub wall_db: f64,
}

impl PathLossLaw {
    pub fn loss_db(&self, d: f64) -> f64 {
        self.intercept_db + self.slope_db * d.log10() + self.linear_db_per_m * d + self.wall_db
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathLossModel {
    pub macro_link: PathLossLaw,
    pub macro_small: PathLossLaw,
    pub indoor: PathLossLaw,
    pub cross_house: PathLossLaw,
    pub min_distance_m: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        let outdoor = PathLossLaw { intercept_db: 15.3, slope_db: 37.6, linear_db_per_m: 0.0, wall_db: 0.0 };
        PathLossModel {
            macro_link: outdoor,
            macro_small: PathLossLaw { wall_db: 10.0, ..outdoor },
            indoor: PathLossLaw { intercept_db: 38.46, slope_db: 20.0, linear_db_per_m: 0.7, wall_db: 0.0 },
            cross_house: PathLossLaw { wall_db: 20.0, ..outdoor },
            min_distance_m: 1.0,
        }
    }
}

fn is_macro(r: Role) -> bool {
    matches!(r, Role::MacroBs | Role::MDevice)
}

fn is_small(r: Role) -> bool {
    matches!(r, Role::Fbs | Role::SDevice)
}

/// Link class between two nodes. Macrocell nodes only share the licensed
/// band with small cell nodes, so macro–WLAN pairs and mDevice–mDevice
/// pairs have no class.
pub fn classify(a: &Node, b: &Node) -> Result<LinkClass> {
    let (ra, rb) = (a.role, b.role);
    let class = match (is_macro(ra), is_macro(rb)) {
        (true, true) if ra != rb => Some(LinkClass::Macro),
        (true, true) => None,
        (true, false) if is_small(rb) => Some(LinkClass::MacroSmall),
        (false, true) if is_small(ra) => Some(LinkClass::MacroSmall),
        (false, false) if a.house == b.house => Some(LinkClass::Indoor),
        (false, false) => Some(LinkClass::CrossHouse),
        _ => None,
    };
    class.ok_or_else(|| {
        Error::Config(format!("no path-loss class for {} ({}) to {} ({})", a.label, ra.as_str(), b.label, rb.as_str()))
    })
}

impl PathLossModel {
    pub fn law(&self, class: LinkClass) -> &PathLossLaw {
        match class {
            LinkClass::Macro => &self.macro_link,
            LinkClass::MacroSmall => &self.macro_small,
            LinkClass::Indoor => &self.indoor,
            LinkClass::CrossHouse => &self.cross_house,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_distance_m > 0.0) {
            return Err(Error::Config(format!("pathloss.min_distance_m must be positive, got {}", self.min_distance_m)));
        }
        for (name, l) in [
            ("macro_link", self.macro_link),
            ("macro_small", self.macro_small),
            ("indoor", self.indoor),
            ("cross_house", self.cross_house),
        ] {
            if l.slope_db < 0.0 || l.linear_db_per_m < 0.0 || (l.slope_db == 0.0 && l.linear_db_per_m == 0.0) {
                return Err(Error::Config(format!("pathloss.{name} must increase with distance")));
            }
        }
        Ok(())
    }

    /// Loss in dB at distance `d`, clamped below at the minimum distance.
    pub fn loss_db(&self, class: LinkClass, d: f64) -> f64 {
        self.law(class).loss_db(d.max(self.min_distance_m))
    }

    pub fn link_loss_db(&self, a: &Node, b: &Node) -> Result<f64> {
        Ok(self.loss_db(classify(a, b)?, a.distance(b)))
    }
}
