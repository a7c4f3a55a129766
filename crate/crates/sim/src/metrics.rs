//! Per-device and per-user throughput and utility.

use dualband::rate::{utility, Throughput, Utility};
use dualband::{Error, Result};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::topology::{Node, Role};

/// Finite utilities as numbers, minus infinity as `null`.
mod utility_serde {
    use super::*;

    pub fn serialize<S: Serializer>(u: &Utility, s: S) -> std::result::Result<S::Ok, S::Error> {
        u.value().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Utility, D::Error> {
        Ok(match Option::<f64>::deserialize(d)? {
            Some(v) => Utility::Finite(v),
            None => Utility::NegInfinity,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceResult {
    pub device: String,
    pub role: Role,
    pub house: Option<usize>,
    pub throughput_bps: f64,
    #[serde(with = "utility_serde")]
    pub utility: Utility,
}

impl DeviceResult {
    pub fn new(node: &Node, throughput_bps: f64) -> Result<Self> {
        Ok(DeviceResult {
            device: node.label.clone(),
            role: node.role,
            house: node.house,
            throughput_bps,
            utility: utility(Throughput::new(throughput_bps)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserResult {
    pub user: String,
    pub is_macro: bool,
    pub devices: Vec<String>,
    #[serde(with = "utility_serde")]
    pub utility: Utility,
}

/// Sums device utilities per user. Every device must belong to exactly one
/// user and every listed device must exist.
pub fn collect_user_metrics(devices: &[DeviceResult], users: &[(String, Vec<String>)]) -> Result<Vec<UserResult>> {
    let mut owner: Vec<Option<usize>> = vec![None; devices.len()];
    let mut out = Vec::with_capacity(users.len());
    for (ui, (user, owned)) in users.iter().enumerate() {
        let mut total = Utility::Finite(0.0);
        let mut is_macro = false;
        for label in owned {
            let di = devices
                .iter()
                .position(|d| &d.device == label)
                .ok_or_else(|| Error::Config(format!("user {user} lists unknown device {label}")))?;
            if let Some(prev) = owner[di].replace(ui) {
                return Err(Error::Config(format!("device {label} owned by {} and {user}", users[prev].0)));
            }
            is_macro |= devices[di].role == Role::MDevice;
            total = total + devices[di].utility;
        }
        out.push(UserResult { user: user.clone(), is_macro, devices: owned.clone(), utility: total });
    }
    if let Some(di) = owner.iter().position(Option::is_none) {
        return Err(Error::Config(format!("device {} is not mapped to a user", devices[di].device)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dev(label: &str, role: Role, bps: f64) -> DeviceResult {
        DeviceResult {
            device: label.into(),
            role,
            house: None,
            throughput_bps: bps,
            utility: utility(Throughput::new(bps).unwrap()),
        }
    }

    #[test]
    fn sums_and_rejects_unmapped() {
        let devs = vec![dev("a", Role::SDevice, 1e6), dev("b", Role::WDevice, 2e6), dev("m", Role::MDevice, 0.0)];
        let users = vec![("u".to_string(), vec!["a".to_string(), "b".to_string()]), ("v".to_string(), vec!["m".to_string()])];
        let r = collect_user_metrics(&devs, &users).unwrap();
        assert!((r[0].utility.value().unwrap() - (1e6f64.ln() + 2e6f64.ln())).abs() < 1e-12);
        assert!(r[1].is_macro && r[1].utility == Utility::NegInfinity);
        assert!(collect_user_metrics(&devs, &users[..1]).is_err());
        let twice = vec![users[0].clone(), ("w".to_string(), vec!["a".to_string(), "m".to_string()])];
        assert!(collect_user_metrics(&devs, &twice).is_err());
    }
}
