//! Molecule parameters, field configurations, and the |J, M; m1, m2> basis.
//!
//! Parameter files are line-based `key = value [unit]` text with `#`
//! comments. Values are converted to SI on load: angular frequencies in
//! rad/s, energies in J, dipole moments in C m, polarizabilities in
//! J/(W/m^2), fields in T and V/m.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::angmom::HalfInt;
use crate::consts::*;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("invalid value for `{key}`: {msg}")]
    Invalid { key: String, msg: String },
}

/// One vibrational pole of the excited potential: the transition
/// X(v=0, J=0) -> (v', J'=1) at angular frequency `omega` with width `gamma`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VibPole {
    pub vprime: u32,
    /// rad/s
    pub omega: f64,
    /// rad/s
    pub gamma: f64,
}

/// All molecule constants, in SI units.
#[derive(Clone, Debug, PartialEq)]
pub struct MoleculeParams {
    pub name: String,
    pub i1: HalfInt,
    pub i2: HalfInt,
    /// Ground-state rotational constant, rad/s.
    pub b_v: f64,
    /// Excited-state rotational constant, rad/s.
    pub b_vp: f64,
    pub g_r: f64,
    pub g1: f64,
    pub g2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    /// Nuclear quadrupole coupling constants, J.
    pub eqq1: f64,
    pub eqq2: f64,
    /// Permanent molecular-frame dipole, C m.
    pub d_perm: f64,
    /// Background polarizabilities, J/(W/m^2).
    pub alpha_bg_par: f64,
    pub alpha_bg_perp: f64,
    /// Uniform intermediate-state linewidth for the imaginary part, rad/s.
    pub gamma_f: f64,
    pub poles: Vec<VibPole>,
}

impl MoleculeParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |key: &str, msg: &str| {
            Err(ModelError::Invalid { key: key.into(), msg: msg.into() })
        };
        if self.i1.twice() <= 0 {
            return bad("I1", "nuclear spin must be positive");
        }
        if self.i2.twice() <= 0 {
            return bad("I2", "nuclear spin must be positive");
        }
        if self.b_v <= 0.0 {
            return bad("Bv", "rotational constant must be positive");
        }
        if self.b_vp <= 0.0 {
            return bad("Bvp", "rotational constant must be positive");
        }
        if self.d_perm <= 0.0 {
            return bad("d_perm", "permanent dipole must be positive");
        }
        if self.gamma_f <= 0.0 {
            return bad("gamma_f", "linewidth must be positive");
        }
        if self.alpha_bg_par == self.alpha_bg_perp {
            return bad("alpha_bg_par", "background polarizabilities must differ");
        }
        if self.poles.is_empty() {
            return bad("pole", "at least one vibrational pole is required");
        }
        for w in self.poles.windows(2) {
            if w[1].omega <= w[0].omega {
                return bad("pole", "pole frequencies must be strictly increasing");
            }
        }
        for p in &self.poles {
            if p.omega <= 0.0 {
                return bad("pole", "pole frequency must be positive");
            }
            if p.gamma <= 0.0 {
                return bad("pole", "pole width must be positive");
            }
            if p.gamma > 1e-3 * p.omega {
                return bad("pole", "pole width must be far below the transition frequency");
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let mut kv: HashMap<String, (f64, usize)> = HashMap::new();
        let mut name: Option<String> = None;
        let mut poles: Vec<VibPole> = Vec::new();

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lineno = lineno + 1;
            let (key, value) = line.split_once('=').ok_or_else(|| ModelError::Parse {
                line: lineno,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "name" => name = Some(value.to_string()),
                "pole" => {
                    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                    if parts.len() != 3 {
                        return Err(ModelError::Parse {
                            line: lineno,
                            msg: "pole needs `vprime, frequency, width`".into(),
                        });
                    }
                    let vprime: u32 = parts[0].parse().map_err(|_| ModelError::Parse {
                        line: lineno,
                        msg: format!("bad vibrational index `{}`", parts[0]),
                    })?;
                    let omega = parse_quantity(parts[1], Dimension::AngularFrequency)
                        .map_err(|msg| ModelError::Parse { line: lineno, msg })?;
                    let gamma = parse_quantity(parts[2], Dimension::AngularFrequency)
                        .map_err(|msg| ModelError::Parse { line: lineno, msg })?;
                    poles.push(VibPole { vprime, omega, gamma });
                }
                _ => {
                    let dim = dimension_of(key).ok_or_else(|| ModelError::Parse {
                        line: lineno,
                        msg: format!("unknown key `{key}`"),
                    })?;
                    let v = parse_quantity(value, dim)
                        .map_err(|msg| ModelError::Parse { line: lineno, msg })?;
                    kv.insert(key.to_string(), (v, lineno));
                }
            }
        }

        let mut take = |key: &'static str| -> Result<f64, ModelError> {
            kv.remove(key).map(|(v, _)| v).ok_or(ModelError::MissingKey(key))
        };

        let i1 = spin_from_f64(take("I1")?).ok_or_else(|| ModelError::Invalid {
            key: "I1".into(),
            msg: "must be a non-negative integer or half-integer".into(),
        })?;
        let i2 = spin_from_f64(take("I2")?).ok_or_else(|| ModelError::Invalid {
            key: "I2".into(),
            msg: "must be a non-negative integer or half-integer".into(),
        })?;

        poles.sort_by(|a, b| a.omega.partial_cmp(&b.omega).unwrap());
        let params = MoleculeParams {
            name: name.ok_or(ModelError::MissingKey("name"))?,
            i1,
            i2,
            b_v: take("Bv")?,
            b_vp: take("Bvp")?,
            g_r: take("g_r")?,
            g1: take("g1")?,
            g2: take("g2")?,
            sigma1: take("sigma1")?,
            sigma2: take("sigma2")?,
            eqq1: take("eqQ1")?,
            eqq2: take("eqQ2")?,
            d_perm: take("d_perm")?,
            alpha_bg_par: take("alpha_bg_par")?,
            alpha_bg_perp: take("alpha_bg_perp")?,
            gamma_f: take("gamma_f")?,
            poles,
        };
        params.validate()?;
        Ok(params)
    }

    /// Serialize in SI units; reloading reproduces every field bit-for-bit.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_si_text()).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn to_si_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "I1 = {}", self.i1.value());
        let _ = writeln!(s, "I2 = {}", self.i2.value());
        let _ = writeln!(s, "Bv = {} rad/s", self.b_v);
        let _ = writeln!(s, "Bvp = {} rad/s", self.b_vp);
        let _ = writeln!(s, "g_r = {}", self.g_r);
        let _ = writeln!(s, "g1 = {}", self.g1);
        let _ = writeln!(s, "g2 = {}", self.g2);
        let _ = writeln!(s, "sigma1 = {}", self.sigma1);
        let _ = writeln!(s, "sigma2 = {}", self.sigma2);
        let _ = writeln!(s, "eqQ1 = {} J", self.eqq1);
        let _ = writeln!(s, "eqQ2 = {} J", self.eqq2);
        let _ = writeln!(s, "d_perm = {} C*m", self.d_perm);
        let _ = writeln!(s, "alpha_bg_par = {} SI", self.alpha_bg_par);
        let _ = writeln!(s, "alpha_bg_perp = {} SI", self.alpha_bg_perp);
        let _ = writeln!(s, "gamma_f = {} rad/s", self.gamma_f);
        for p in &self.poles {
            let _ = writeln!(s, "pole = {}, {} rad/s, {} rad/s", p.vprime, p.omega, p.gamma);
        }
        s
    }

    pub fn pole(&self, vprime: u32) -> Result<&VibPole, ModelError> {
        self.poles.iter().find(|p| p.vprime == vprime).ok_or_else(|| ModelError::Invalid {
            key: "pole".into(),
            msg: format!("no pole with v' = {vprime} in `{}`", self.name),
        })
    }

    /// Laser angular frequency for a detuning relative to the given pole.
    pub fn omega_for(&self, vprime: u32, detuning: f64) -> Result<f64, ModelError> {
        Ok(self.pole(vprime)?.omega + detuning)
    }

    /// Spin-stretched nuclear projections (m1, m2) = (I1, I2).
    pub fn stretched(&self) -> (HalfInt, HalfInt) {
        (self.i1, self.i2)
    }

    /// Copy with hyperfine structure and nuclear magnetism switched off.
    pub fn hyperfine_free(&self) -> Self {
        MoleculeParams {
            eqq1: 0.0,
            eqq2: 0.0,
            g1: 0.0,
            g2: 0.0,
            sigma1: 0.0,
            sigma2: 0.0,
            ..self.clone()
        }
    }

    /// Copy keeping only the pole with index `vprime`.
    pub fn single_pole(&self, vprime: u32) -> Result<Self, ModelError> {
        let pole = *self.pole(vprime)?;
        Ok(MoleculeParams { poles: vec![pole], ..self.clone() })
    }
}

fn spin_from_f64(v: f64) -> Option<HalfInt> {
    let twice = (2.0 * v).round();
    if (2.0 * v - twice).abs() > 1e-9 || twice < 0.0 {
        return None;
    }
    Some(HalfInt::from_twice(twice as i32))
}

enum Dimension {
    Plain,
    AngularFrequency,
    Energy,
    Dipole,
    Polarizability,
}

fn dimension_of(key: &str) -> Option<Dimension> {
    Some(match key {
        "I1" | "I2" | "g_r" | "g1" | "g2" | "sigma1" | "sigma2" => Dimension::Plain,
        "Bv" | "Bvp" | "gamma_f" => Dimension::AngularFrequency,
        "eqQ1" | "eqQ2" => Dimension::Energy,
        "d_perm" => Dimension::Dipole,
        "alpha_bg_par" | "alpha_bg_perp" => Dimension::Polarizability,
        _ => return None,
    })
}

/// Parse `number [unit]`, including fractions like `3/2` for spins.
fn parse_quantity(text: &str, dim: Dimension) -> Result<f64, String> {
    let mut it = text.split_whitespace();
    let num = it.next().ok_or("empty value")?;
    let unit = it.next().unwrap_or("");
    if it.next().is_some() {
        return Err(format!("trailing garbage in `{text}`"));
    }
    let value: f64 = if let Some((n, d)) = num.split_once('/') {
        let n: f64 = n.parse().map_err(|_| format!("bad number `{num}`"))?;
        let d: f64 = d.parse().map_err(|_| format!("bad number `{num}`"))?;
        n / d
    } else {
        num.parse().map_err(|_| format!("bad number `{num}`"))?
    };
    let factor = match dim {
        Dimension::Plain => match unit {
            "" => 1.0,
            _ => return Err(format!("unexpected unit `{unit}` for dimensionless value")),
        },
        Dimension::AngularFrequency => match unit {
            "Hz" => TWO_PI,
            "kHz" => TWO_PI * 1e3,
            "MHz" => TWO_PI * 1e6,
            "GHz" => TWO_PI * 1e9,
            "THz" => TWO_PI * 1e12,
            "rad/s" => 1.0,
            _ => return Err(format!("unknown frequency unit `{unit}`")),
        },
        Dimension::Energy => match unit {
            "Hz" => PLANCK,
            "kHz" => PLANCK * 1e3,
            "MHz" => PLANCK * 1e6,
            "GHz" => PLANCK * 1e9,
            "J" => 1.0,
            _ => return Err(format!("unknown energy unit `{unit}`")),
        },
        Dimension::Dipole => match unit {
            "D" => DEBYE,
            "C*m" => 1.0,
            _ => return Err(format!("unknown dipole unit `{unit}`")),
        },
        Dimension::Polarizability => match unit {
            // the quantity convention is h x kHz/(W/cm^2)
            "kHz/(W/cm^2)" | "kHz/(W/cm2)" => ALPHA_UNIT,
            "SI" => 1.0,
            _ => return Err(format!("unknown polarizability unit `{unit}`")),
        },
    };
    Ok(value * factor)
}

/// Static and optical fields, SI units internally.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldConfig {
    /// Magnetic field along z, T.
    pub b: f64,
    /// Static electric field along z, V/m.
    pub e: f64,
    /// Laser intensity, W/m^2.
    pub intensity: f64,
    /// Laser angular frequency, rad/s.
    pub omega_laser: f64,
    /// Angle between the linear laser polarization and z, rad; the
    /// polarization vector lies in the x-z plane.
    pub theta: f64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig { b: 0.0, e: 0.0, intensity: 0.0, omega_laser: 0.0, theta: 0.0 }
    }
}

impl FieldConfig {
    /// Construct from lab units: gauss, kV/cm, W/cm^2.
    pub fn from_lab(b_gauss: f64, e_kv_cm: f64, intensity_w_cm2: f64, theta: f64) -> Self {
        FieldConfig {
            b: b_gauss * GAUSS,
            e: e_kv_cm * KV_PER_CM,
            intensity: intensity_w_cm2 * W_PER_CM2,
            omega_laser: 0.0,
            theta,
        }
    }

    pub fn with_laser(mut self, omega: f64, intensity_w_cm2: f64) -> Self {
        self.omega_laser = omega;
        self.intensity = intensity_w_cm2 * W_PER_CM2;
        self
    }

    pub fn with_intensity_si(mut self, intensity: f64) -> Self {
        self.intensity = intensity;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |key: &str, msg: &str| {
            Err(ModelError::Invalid { key: key.into(), msg: msg.into() })
        };
        if self.b < 0.0 {
            return bad("B", "magnetic field must be non-negative");
        }
        if self.e < 0.0 {
            return bad("E", "electric field must be non-negative");
        }
        if self.intensity < 0.0 {
            return bad("intensity", "intensity must be non-negative");
        }
        if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&self.theta) {
            return bad("theta", "polarization angle must lie in [0, pi/2]");
        }
        Ok(())
    }
}

/// One product state |J, M; m1, m2>.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisState {
    pub j: i32,
    pub m: i32,
    pub m1: HalfInt,
    pub m2: HalfInt,
}

impl BasisState {
    /// Twice the total projection M_F = M + m1 + m2.
    pub fn mf_twice(&self) -> i32 {
        2 * self.m + self.m1.twice() + self.m2.twice()
    }
}

/// Ordered product basis over J <= Jmax.
#[derive(Clone, Debug)]
pub struct Basis {
    states: Vec<BasisState>,
    index: HashMap<BasisState, usize>,
    tag: u64,
    pub jmax: i32,
    pub i1: HalfInt,
    pub i2: HalfInt,
}

impl Basis {
    /// Full product basis, lexicographic in (J, M, m1, m2).
    pub fn build(params: &MoleculeParams, jmax: i32) -> Self {
        assert!(jmax >= 0, "Jmax must be non-negative");
        let mut states = Vec::new();
        for j in 0..=jmax {
            for m in -j..=j {
                for m1 in params.i1.projections() {
                    for m2 in params.i2.projections() {
                        states.push(BasisState { j, m, m1, m2 });
                    }
                }
            }
        }
        Self::from_states(states, jmax, params.i1, params.i2)
    }

    /// Basis restricted to a single nuclear-spin channel (m1, m2); useful
    /// when the Hamiltonian is exactly diagonal in the nuclear projections.
    pub fn single_channel(params: &MoleculeParams, jmax: i32, m1: HalfInt, m2: HalfInt) -> Self {
        assert!(params.i1.admits(m1) && params.i2.admits(m2), "bad spin projection");
        let mut states = Vec::new();
        for j in 0..=jmax {
            for m in -j..=j {
                states.push(BasisState { j, m, m1, m2 });
            }
        }
        Self::from_states(states, jmax, params.i1, params.i2)
    }

    fn from_states(states: Vec<BasisState>, jmax: i32, i1: HalfInt, i2: HalfInt) -> Self {
        use std::hash::{Hash, Hasher};
        let index = states.iter().copied().enumerate().map(|(i, s)| (s, i)).collect();
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        (jmax, &states).hash(&mut hasher);
        let tag = hasher.finish();
        Basis { states, index, tag, jmax, i1, i2 }
    }

    /// Content hash identifying this basis; matrices and eigensolutions
    /// carry it so mismatched combinations are caught early.
    pub fn tag(&self) -> u64 {
        self.tag
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[BasisState] {
        &self.states
    }

    pub fn state(&self, i: usize) -> BasisState {
        self.states[i]
    }

    pub fn index_of(&self, s: &BasisState) -> Option<usize> {
        self.index.get(s).copied()
    }

    /// Indices grouped by twice the total projection M_F, ascending.
    pub fn mf_blocks(&self) -> Vec<(i32, Vec<usize>)> {
        let mut blocks: HashMap<i32, Vec<usize>> = HashMap::new();
        for (i, s) in self.states.iter().enumerate() {
            blocks.entry(s.mf_twice()).or_default().push(i);
        }
        let mut out: Vec<(i32, Vec<usize>)> = blocks.into_iter().collect();
        out.sort_by_key(|(mf, _)| *mf);
        out
    }
}
