//! Material parameters and the specimen/garment presets.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Mat3, Result};

/// Tensile friction and yield overrides. Missing fields fall back to the
/// bending values of the parent material.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensileParams {
    #[serde(rename = "K11f", default, skip_serializing_if = "Option::is_none")]
    pub k11f: Option<f64>,
    #[serde(rename = "K22f", default, skip_serializing_if = "Option::is_none")]
    pub k22f: Option<f64>,
    #[serde(rename = "K33f", default, skip_serializing_if = "Option::is_none")]
    pub k33f: Option<f64>,
    #[serde(rename = "eps0t", default, skip_serializing_if = "Option::is_none")]
    pub eps0: Option<f64>,
    #[serde(rename = "epsInft", default, skip_serializing_if = "Option::is_none")]
    pub eps_inf: Option<f64>,
    #[serde(rename = "epsY0t", default, skip_serializing_if = "Option::is_none")]
    pub eps_y0: Option<f64>,
}

/// Per-material constants.
///
/// The table columns `3 × K_b` and `3 × K_friction` are stored as given so
/// the JSON form round-trips bit-exactly; use [`MaterialParams::kb`] and
/// [`MaterialParams::k_friction`] for the stiffnesses themselves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialParams {
    pub rho: f64,
    #[serde(rename = "Kb3")]
    pub kb3: f64,
    #[serde(rename = "K11")]
    pub k11: f64,
    #[serde(rename = "K22")]
    pub k22: f64,
    #[serde(rename = "K12")]
    pub k12: f64,
    #[serde(rename = "K33")]
    pub k33: f64,
    #[serde(rename = "KFriction3")]
    pub kfriction3: f64,
    #[serde(rename = "eps0")]
    pub eps0: f64,
    #[serde(rename = "epsInf")]
    pub eps_inf: f64,
    #[serde(rename = "tauF")]
    pub tau_f: f64,
    #[serde(rename = "Kh0")]
    pub kh0: f64,
    pub g: f64,
    #[serde(rename = "tauP")]
    pub tau_p: f64,
    #[serde(rename = "epsY0")]
    pub eps_y0: f64,
    #[serde(default, skip_serializing_if = "is_default_tensile")]
    pub tensile: TensileParams,
}

fn is_default_tensile(t: &TensileParams) -> bool {
    *t == TensileParams::default()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetFamily {
    Specimen,
    Garment,
}

/// A violated constraint, naming the offending fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub fields: Vec<&'static str>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.message, self.fields.join(", "))
    }
}

pub const PRESET_NAMES: [&str; 3] = ["cotton", "denim", "polyester"];

#[allow(clippy::too_many_arguments)]
const fn row(
    rho: f64,
    kb3: f64,
    k11: f64,
    k22: f64,
    k12: f64,
    k33: f64,
    kfriction3: f64,
    eps0: f64,
    eps_inf: f64,
    tau_f: f64,
    kh0: f64,
    g: f64,
    tau_p: f64,
    eps_y0: f64,
) -> MaterialParams {
    MaterialParams {
        rho,
        kb3,
        k11,
        k22,
        k12,
        k33,
        kfriction3,
        eps0,
        eps_inf,
        tau_f,
        kh0,
        g,
        tau_p,
        eps_y0,
        tensile: TensileParams { k11f: None, k22f: None, k33f: None, eps0: None, eps_inf: None, eps_y0: None },
    }
}

const SPECIMEN: [MaterialParams; 3] = [
    row(0.06, 5e-6, 50.0, 50.0, 0.2, 30.0, 1e-5, 0.1, 1.7, 30.0, 5e-6, 0.99, 30.0, 1.8),
    row(0.25, 1.2e-4, 100.0, 100.0, 0.2, 20.0, 5e-5, 0.1, 1.8, 30.0, 1.2e-4, 0.99, 30.0, 2.0),
    row(0.18, 1.2e-4, 50.0, 50.0, 0.2, 30.0, 1e-7, 0.01, 0.1, 30.0, 1.2e-4, 0.99, 30.0, 3.0),
];

const GARMENT: [MaterialParams; 3] = [
    row(0.1, 1e-6, 200.0, 200.0, 0.2, 20.0, 4e-6, 0.1, 1.2, 30.0, 1e-6, 0.99, 30.0, 1.5),
    row(0.2, 3e-5, 200.0, 200.0, 0.2, 150.0, 6e-5, 0.2, 1.2, 30.0, 3e-5, 0.99, 30.0, 1.2),
    row(0.15, 1e-6, 100.0, 100.0, 0.2, 20.0, 7e-7, 0.1, 0.1, 30.0, 1e-6, 0.99, 30.0, 3.1),
];

/// Looks up a preset. `name` may carry a `-garment` or `-specimen` suffix,
/// which overrides `family`.
pub fn preset(name: &str, family: PresetFamily) -> Result<MaterialParams> {
    let (base, family) = match name.rsplit_once('-') {
        Some((b, "garment")) => (b, PresetFamily::Garment),
        Some((b, "specimen")) => (b, PresetFamily::Specimen),
        _ => (name, family),
    };
    let i = PRESET_NAMES.iter().position(|n| *n == base).ok_or_else(|| Error::UnknownPreset {
        name: name.to_string(),
        valid: valid_preset_names().join(", "),
    })?;
    Ok(match family {
        PresetFamily::Specimen => SPECIMEN[i],
        PresetFamily::Garment => GARMENT[i],
    })
}

pub fn valid_preset_names() -> Vec<String> {
    PRESET_NAMES
        .iter()
        .flat_map(|n| [n.to_string(), format!("{n}-garment")])
        .collect()
}

impl MaterialParams {
    pub fn kb(&self) -> f64 {
        self.kb3 / 3.0
    }

    pub fn k_friction(&self) -> f64 {
        self.kfriction3 / 3.0
    }

    /// Membrane stiffness in Voigt form acting on `(ε_uu, ε_vv, ε_uv)`.
    pub fn stretch_stiffness(&self) -> Mat3 {
        Mat3::new(self.k11, self.k12, 0.0, self.k12, self.k22, 0.0, 0.0, 0.0, self.k33)
    }

    pub fn tensile_friction_stiffness(&self) -> [f64; 3] {
        let kf = self.k_friction();
        [
            self.tensile.k11f.unwrap_or(kf),
            self.tensile.k22f.unwrap_or(kf),
            self.tensile.k33f.unwrap_or(kf),
        ]
    }

    pub fn tensile_eps0(&self) -> f64 {
        self.tensile.eps0.unwrap_or(self.eps0)
    }

    pub fn tensile_eps_inf(&self) -> f64 {
        self.tensile.eps_inf.unwrap_or(self.eps_inf)
    }

    pub fn tensile_eps_y0(&self) -> f64 {
        self.tensile.eps_y0.unwrap_or(self.eps_y0)
    }

    /// Every violated constraint; empty when the parameters are usable.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut check = |ok: bool, fields: Vec<&'static str>, message: &str| {
            if !ok {
                out.push(Violation { fields, message: message.to_string() });
            }
        };
        let finite = [
            ("rho", self.rho),
            ("Kb3", self.kb3),
            ("K11", self.k11),
            ("K22", self.k22),
            ("K12", self.k12),
            ("K33", self.k33),
            ("KFriction3", self.kfriction3),
            ("eps0", self.eps0),
            ("epsInf", self.eps_inf),
            ("tauF", self.tau_f),
            ("Kh0", self.kh0),
            ("g", self.g),
            ("tauP", self.tau_p),
            ("epsY0", self.eps_y0),
        ];
        for (name, v) in finite {
            check(v.is_finite(), vec![name], "must be finite");
        }
        check(self.rho > 0.0, vec!["rho"], "rho > 0");
        for (name, v) in [
            ("Kb3", self.kb3),
            ("K11", self.k11),
            ("K22", self.k22),
            ("K33", self.k33),
            ("KFriction3", self.kfriction3),
            ("Kh0", self.kh0),
        ] {
            check(v >= 0.0, vec![name], "stiffness >= 0");
        }
        check(self.k12.abs() <= (self.k11 * self.k22).sqrt(), vec!["K12", "K11", "K22"], "K12^2 <= K11*K22");
        check(self.tau_f > 0.0, vec!["tauF"], "tauF > 0");
        check(self.tau_p > 0.0, vec!["tauP"], "tauP > 0");
        check(self.g > 0.0 && self.g < 1.0, vec!["g"], "g ∈ (0,1)");
        check(self.eps0 >= 0.0, vec!["eps0"], "eps0 >= 0");
        check(self.eps_inf >= self.eps0, vec!["epsInf", "eps0"], "epsInf >= eps0");
        check(self.eps_y0 >= self.eps0, vec!["epsY0", "eps0"], "epsY0 >= eps0");
        let t = &self.tensile;
        for (name, v) in [("K11f", t.k11f), ("K22f", t.k22f), ("K33f", t.k33f)] {
            if let Some(v) = v {
                check(v.is_finite() && v >= 0.0, vec![name], "stiffness >= 0");
            }
        }
        let (e0, einf, ey) = (self.tensile_eps0(), self.tensile_eps_inf(), self.tensile_eps_y0());
        check(e0 >= 0.0, vec!["eps0t"], "eps0t >= 0");
        check(einf >= e0, vec!["epsInft", "eps0t"], "epsInft >= eps0t");
        check(ey >= e0, vec!["epsY0t", "eps0t"], "epsY0t >= eps0t");
        out
    }

    pub fn validated(self) -> Result<Self> {
        let v = self.validate();
        if v.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidMaterial(v))
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("material serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
