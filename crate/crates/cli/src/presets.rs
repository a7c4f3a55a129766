//! Built-in configurations.

use std::fmt;
use std::str::FromStr;

use dualband_sim::scenario::{ScenarioConfig, UseCase, Variant};

use crate::config::{EtaSweepConfig, RunConfig};
use crate::error::CliError;
use crate::sweeps::TfSweepSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// One house, no macrocell, all six use-case columns.
    Scenario1,
    /// 40 houses under a macrocell, all six columns.
    Realistic,
    Fig4,
    Fig5,
    Fig6,
    Fig8,
}

impl Preset {
    pub const ALL: [Preset; 6] = [Preset::Scenario1, Preset::Realistic, Preset::Fig4, Preset::Fig5, Preset::Fig6, Preset::Fig8];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Scenario1 => "scenario-1",
            Preset::Realistic => "realistic",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
            Preset::Fig6 => "fig6",
            Preset::Fig8 => "fig8",
        }
    }

    fn names() -> String {
        Preset::ALL.iter().map(|p| p.name()).collect::<Vec<_>>().join(", ")
    }

    /// Scenario batch run by `simulate`.
    pub fn runs(self) -> Option<Vec<RunConfig>> {
        let (build, seeds): (fn(UseCase, Variant) -> ScenarioConfig, Vec<u64>) = match self {
            Preset::Scenario1 => (ScenarioConfig::scenario1, vec![1]),
            Preset::Realistic => (ScenarioConfig::realistic, vec![1, 2, 3, 4, 5]),
            _ => return None,
        };
        Some(COLUMNS.iter().map(|&(uc, v)| RunConfig { seeds: seeds.clone(), scenario: build(uc, v) }).collect())
    }

    pub fn tf_sweep(self) -> Option<TfSweepSpec> {
        match self {
            Preset::Fig4 => Some(TfSweepSpec::default()),
            Preset::Fig5 | Preset::Fig6 => Some(TfSweepSpec::single_wlan()),
            _ => None,
        }
    }

    pub fn eta_sweep(self) -> Option<EtaSweepConfig> {
        match self {
            Preset::Fig8 => Some(EtaSweepConfig {
                celltx_ms: dualband_sim::experiments::default_celltx_grid(),
                ..Default::default()
            }),
            _ => None,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown preset {s:?}; valid presets: {}", Preset::names())))
    }
}

/// The six use-case columns, in table order.
pub const COLUMNS: [(UseCase, Variant); 6] = [
    (UseCase::WifiHotspot, Variant::Simple),
    (UseCase::FemtoPlusWlan, Variant::Simple),
    (UseCase::Ifw, Variant::Simple),
    (UseCase::Ifw, Variant::Optimal),
    (UseCase::DbfPlusWlan, Variant::Simple),
    (UseCase::DbfPlusWlan, Variant::Optimal),
];

/// Reference throughputs for scenario 1, in Mbps, with the printed
/// utility of the user owning both devices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceColumn {
    pub label: &'static str,
    pub use_case: UseCase,
    pub variant: Variant,
    pub sdevice_mbps: f64,
    pub wdevice_mbps: f64,
    pub utility: f64,
    pub t_f: Option<f64>,
    /// Values are compared, not just ordered.
    pub value_checked: bool,
}

pub const SCENARIO1_REFERENCE: [ReferenceColumn; 6] = [
    ReferenceColumn { label: "WiFi Hotspot", use_case: UseCase::WifiHotspot, variant: Variant::Simple, sdevice_mbps: 32.8, wdevice_mbps: 28.5, utility: 34.5, t_f: None, value_checked: true },
    ReferenceColumn { label: "Femto + WLAN", use_case: UseCase::FemtoPlusWlan, variant: Variant::Simple, sdevice_mbps: 5.5, wdevice_mbps: 35.0, utility: 32.9, t_f: None, value_checked: true },
    ReferenceColumn { label: "IFW Simple", use_case: UseCase::Ifw, variant: Variant::Simple, sdevice_mbps: 51.7, wdevice_mbps: 11.6, utility: 34.0, t_f: None, value_checked: false },
    ReferenceColumn { label: "IFW Optimal", use_case: UseCase::Ifw, variant: Variant::Optimal, sdevice_mbps: 30.7, wdevice_mbps: 35.0, utility: 34.6, t_f: None, value_checked: false },
    ReferenceColumn { label: "DBF Simple", use_case: UseCase::DbfPlusWlan, variant: Variant::Simple, sdevice_mbps: 66.9, wdevice_mbps: 11.7, utility: 34.3, t_f: None, value_checked: true },
    ReferenceColumn { label: "DBF Optimal", use_case: UseCase::DbfPlusWlan, variant: Variant::Optimal, sdevice_mbps: 38.0, wdevice_mbps: 33.7, utility: 34.8, t_f: Some(0.42), value_checked: true },
];

pub fn reference_for(use_case: UseCase, variant: Variant) -> Option<&'static ReferenceColumn> {
    SCENARIO1_REFERENCE.iter().find(|c| c.use_case == use_case && c.variant == variant)
}
