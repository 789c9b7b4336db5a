//! Whitespace-separated text formats for the three instance types.
//!
//! Parsers consume a token stream, never panic on malformed input, and
//! bound their allocations by what the stream actually contains; writers
//! emit shortest round-trip float formatting, so write-then-parse
//! reproduces the instance bit for bit and byte-identical reruns are
//! guaranteed.
//!
//! Layouts (all whitespace-separated decimal):
//!
//! - GMM: `D K N m`, then K alphas, K rows of D means (one component per
//!   row), K icf rows (`q_1..q_D l_1..`), then N rows of D data values.
//! - BA: `n_cams n_pts n_obs`, n_cams rows of 11 camera values, n_pts rows
//!   of 3, n_obs rows of `cam_idx pt_idx w m_x m_y` (zero-based indices).
//! - HT (one file, model block then instance block): `M n_triangles
//!   n_bones`, M vertex rows of 3, triangle rows of 3 indices, n_bones
//!   skeleton rows (`parent` with -1 for the root, 16 rest-transform
//!   values row-major, 3 axis codes), M skin-weight rows of n_bones
//!   values; then the pose (6 + n_bones - 2 values), `N`, and N rows of
//!   `tri_idx u1 u2 y_x y_y y_z`.

use crate::ba::{BaInstance, CameraParams, CAM_PARAMS};
use crate::gmm::{tri_len, GmmInstance};
use crate::ht::{Bone, HandModel, HtInstance};
use ad_core::Mat;
use std::fmt;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub enum ParseError {
    /// Stream ended before the declared counts were satisfied.
    UnexpectedEof { token: usize },
    /// A token failed to parse as the expected numeric type, or was not
    /// finite where a finite value is required.
    BadNumber { token: usize, text: String },
    /// A count or index is outside its permitted range.
    BadCount {
        token: usize,
        what: &'static str,
        value: i64,
    },
    /// The parsed instance violates a structural invariant.
    Constraint(String),
    /// Tokens remain after a complete instance.
    TrailingData { token: usize },
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::UnexpectedEof { token } => {
                write!(f, "unexpected end of input at token {token}")
            }
            ParseError::BadNumber { token, text } => {
                write!(f, "token {token}: '{text}' is not a valid finite number")
            }
            ParseError::BadCount { token, what, value } => {
                write!(f, "token {token}: {what} = {value} out of range")
            }
            ParseError::Constraint(msg) => write!(f, "invalid instance: {msg}"),
            ParseError::TrailingData { token } => {
                write!(f, "trailing data at token {token}")
            }
        }
    }
}

impl std::error::Error for ParseError {}

struct Tokens<'a> {
    it: std::str::SplitAsciiWhitespace<'a>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        Tokens {
            it: text.split_ascii_whitespace(),
            pos: 0,
        }
    }

    fn next_raw(&mut self) -> Result<&'a str, ParseError> {
        let t = self
            .it
            .next()
            .ok_or(ParseError::UnexpectedEof { token: self.pos })?;
        self.pos += 1;
        Ok(t)
    }

    fn f64(&mut self) -> Result<f64, ParseError> {
        let pos = self.pos;
        let t = self.next_raw()?;
        match t.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(ParseError::BadNumber {
                token: pos,
                text: t.chars().take(40).collect(),
            }),
        }
    }

    fn count(&mut self, what: &'static str, min: usize, max: usize) -> Result<usize, ParseError> {
        let pos = self.pos;
        let t = self.next_raw()?;
        let v: i64 = t.parse().map_err(|_| ParseError::BadNumber {
            token: pos,
            text: t.chars().take(40).collect(),
        })?;
        if v < min as i64 || v > max as i64 {
            return Err(ParseError::BadCount {
                token: pos,
                what,
                value: v,
            });
        }
        Ok(v as usize)
    }

    /// Signed integer for the skeleton parent field.
    fn i64(&mut self) -> Result<i64, ParseError> {
        let pos = self.pos;
        let t = self.next_raw()?;
        t.parse().map_err(|_| ParseError::BadNumber {
            token: pos,
            text: t.chars().take(40).collect(),
        })
    }

    /// Read `len` floats; allocation grows with the tokens actually read,
    /// so a hostile header cannot force a huge reservation.
    fn f64_vec(&mut self, len: usize) -> Result<Vec<f64>, ParseError> {
        let mut v = Vec::with_capacity(len.min(1 << 20));
        for _ in 0..len {
            v.push(self.f64()?);
        }
        Ok(v)
    }

    fn finish(&mut self) -> Result<(), ParseError> {
        if self.it.next().is_some() {
            return Err(ParseError::TrailingData { token: self.pos });
        }
        Ok(())
    }
}

fn constraint(e: crate::error::ObjectiveError) -> ParseError {
    ParseError::Constraint(e.to_string())
}

const MAX_DIM: usize = 1 << 16;
const MAX_COUNT: usize = 1 << 30;
const MAX_BONES: usize = 1 << 10;

// GMM

pub fn write_gmm(inst: &GmmInstance) -> String {
    let mut s = String::new();
    writeln!(s, "{} {} {} {}", inst.d, inst.k, inst.n, inst.wishart_m).unwrap();
    for a in &inst.alphas {
        writeln!(s, "{a}").unwrap();
    }
    for comp in 0..inst.k {
        write_row(&mut s, inst.means.col(comp));
    }
    for comp in 0..inst.k {
        write_row(&mut s, inst.icf.col(comp));
    }
    for i in 0..inst.n {
        write_row(&mut s, inst.data.col(i));
    }
    s
}

fn write_row(s: &mut String, vals: &[f64]) {
    for (i, v) in vals.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{v}").unwrap();
    }
    s.push('\n');
}

pub fn parse_gmm(text: &str) -> Result<GmmInstance, ParseError> {
    let mut t = Tokens::new(text);
    let d = t.count("D", 1, MAX_DIM)?;
    let k = t.count("K", 1, MAX_COUNT)?;
    let n = t.count("N", 1, MAX_COUNT)?;
    let m = t.f64()?;
    let alphas = t.f64_vec(k)?;
    let means = t.f64_vec(d * k)?;
    let icf_rows = d + tri_len(d);
    let icf = t.f64_vec(icf_rows * k)?;
    let data = t.f64_vec(d * n)?;
    t.finish()?;
    let inst = GmmInstance {
        d,
        k,
        n,
        alphas,
        means: Mat::from_col_major(d, k, means),
        icf: Mat::from_col_major(icf_rows, k, icf),
        data: Mat::from_col_major(d, n, data),
        wishart_m: m,
    };
    inst.validate().map_err(constraint)?;
    Ok(inst)
}

// BA

pub fn write_ba(inst: &BaInstance) -> String {
    let mut s = String::new();
    writeln!(s, "{} {} {}", inst.n_cams(), inst.n_pts(), inst.n_obs()).unwrap();
    for cam in &inst.cams {
        write_row(&mut s, &cam.to_array());
    }
    for p in 0..inst.n_pts() {
        write_row(&mut s, inst.points.col(p));
    }
    for (j, &(ci, pi)) in inst.obs.iter().enumerate() {
        let m = inst.measurement(j);
        writeln!(s, "{} {} {} {} {}", ci, pi, inst.weights[j], m[0], m[1]).unwrap();
    }
    s
}

pub fn parse_ba(text: &str) -> Result<BaInstance, ParseError> {
    let mut t = Tokens::new(text);
    let n_cams = t.count("n_cams", 1, MAX_COUNT)?;
    let n_pts = t.count("n_pts", 1, MAX_COUNT)?;
    let n_obs = t.count("n_obs", 1, MAX_COUNT)?;
    let mut cams = Vec::with_capacity(n_cams.min(1 << 16));
    for _ in 0..n_cams {
        let vals = t.f64_vec(CAM_PARAMS)?;
        cams.push(CameraParams::from_slice(&vals));
    }
    let points = t.f64_vec(3 * n_pts)?;
    let mut weights = Vec::with_capacity(n_obs.min(1 << 20));
    let mut obs = Vec::with_capacity(n_obs.min(1 << 20));
    let mut meas = Vec::with_capacity((2 * n_obs).min(1 << 20));
    for _ in 0..n_obs {
        let ci = t.count("cam_idx", 0, n_cams.saturating_sub(1))?;
        let pi = t.count("pt_idx", 0, n_pts.saturating_sub(1))?;
        weights.push(t.f64()?);
        obs.push((ci as u32, pi as u32));
        meas.push(t.f64()?);
        meas.push(t.f64()?);
    }
    t.finish()?;
    let inst = BaInstance {
        cams,
        points: Mat::from_col_major(3, n_pts, points),
        weights,
        obs,
        measurements: Mat::from_col_major(2, n_obs, meas),
    };
    inst.validate().map_err(constraint)?;
    Ok(inst)
}

// HT

pub fn write_ht(inst: &HtInstance) -> String {
    let model = &inst.model;
    let mut s = String::new();
    writeln!(
        s,
        "{} {} {}",
        model.n_vertices(),
        model.triangles.len(),
        model.n_bones()
    )
    .unwrap();
    for j in 0..model.n_vertices() {
        write_row(&mut s, model.base_points.col(j));
    }
    for tri in &model.triangles {
        writeln!(s, "{} {} {}", tri[0], tri[1], tri[2]).unwrap();
    }
    for bone in &model.bones {
        let parent = bone.parent.map(|p| p as i64).unwrap_or(-1);
        write!(s, "{parent}").unwrap();
        for v in &bone.rest_local {
            write!(s, " {v}").unwrap();
        }
        writeln!(s, " {} {} {}", bone.axes[0], bone.axes[1], bone.axes[2]).unwrap();
    }
    for j in 0..model.n_vertices() {
        write_row(&mut s, model.skin_weights.col(j));
    }
    // Instance block.
    write_row(&mut s, &inst.pose);
    writeln!(s, "{}", inst.n_corr()).unwrap();
    for q in 0..inst.n_corr() {
        let y = inst.targets.col(q);
        writeln!(
            s,
            "{} {} {} {} {} {}",
            inst.correspondences[q],
            inst.us.get(0, q),
            inst.us.get(1, q),
            y[0],
            y[1],
            y[2]
        )
        .unwrap();
    }
    s
}

fn parse_ht_model(t: &mut Tokens<'_>) -> Result<HandModel, ParseError> {
    let m = t.count("M", 1, MAX_COUNT)?;
    let n_tri = t.count("n_triangles", 1, MAX_COUNT)?;
    let n_bones = t.count("n_bones", 1, MAX_BONES)?;
    let base = t.f64_vec(3 * m)?;
    let mut triangles = Vec::with_capacity(n_tri.min(1 << 20));
    for _ in 0..n_tri {
        let a = t.count("triangle vertex", 0, m - 1)?;
        let b = t.count("triangle vertex", 0, m - 1)?;
        let c = t.count("triangle vertex", 0, m - 1)?;
        triangles.push([a as u32, b as u32, c as u32]);
    }
    let mut bones = Vec::with_capacity(n_bones);
    for i in 0..n_bones {
        let pos = t.pos;
        let parent = t.i64()?;
        let parent = match parent {
            -1 => None,
            p if p >= 0 && (p as usize) < i => Some(p as u32),
            p => {
                return Err(ParseError::BadCount {
                    token: pos,
                    what: "bone parent",
                    value: p,
                })
            }
        };
        let rest = t.f64_vec(16)?;
        let mut rest_local = [0.0; 16];
        rest_local.copy_from_slice(&rest);
        let mut axes = [0u8; 3];
        for a in &mut axes {
            *a = t.count("axis code", 0, 2)? as u8;
        }
        bones.push(Bone {
            parent,
            rest_local,
            axes,
        });
    }
    let weights = t.f64_vec(n_bones * m)?;
    Ok(HandModel {
        base_points: Mat::from_col_major(3, m, base),
        triangles,
        skin_weights: Mat::from_col_major(n_bones, m, weights),
        bones,
    })
}

pub fn parse_ht(text: &str) -> Result<HtInstance, ParseError> {
    let mut t = Tokens::new(text);
    let model = parse_ht_model(&mut t)?;
    let pose = t.f64_vec(model.pose_len())?;
    let n = t.count("N", 1, MAX_COUNT)?;
    let n_tri = model.triangles.len();
    let mut correspondences = Vec::with_capacity(n.min(1 << 20));
    let mut us = Vec::with_capacity((2 * n).min(1 << 20));
    let mut targets = Vec::with_capacity((3 * n).min(1 << 20));
    for _ in 0..n {
        correspondences.push(t.count("correspondence triangle", 0, n_tri - 1)? as u32);
        us.push(t.f64()?);
        us.push(t.f64()?);
        targets.push(t.f64()?);
        targets.push(t.f64()?);
        targets.push(t.f64()?);
    }
    t.finish()?;
    let inst = HtInstance {
        model,
        pose,
        correspondences,
        us: Mat::from_col_major(2, n, us),
        targets: Mat::from_col_major(3, n, targets),
    };
    inst.validate().map_err(constraint)?;
    Ok(inst)
}

// File naming used by the generator and the CLI lookup.

pub fn gmm_filename(d: usize, k: usize, n: usize) -> String {
    format!("gmm_d{d}_k{k}_n{n}.txt")
}

pub fn ba_filename(n_cams: usize, n_pts: usize, n_obs: usize) -> String {
    format!("ba_c{n_cams}_p{n_pts}_o{n_obs}.txt")
}

pub fn ht_filename(size_class: &str, n_corr: usize) -> String {
    format!("ht_{size_class}_n{n_corr}.txt")
}
