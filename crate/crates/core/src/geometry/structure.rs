//! Discretization residuals of the Gauss, Codazzi and Ricci equations and of
//! both Simons identities, with every ambient-curvature term equal to zero.
//!
//! The intrinsic curvature on the left of the Gauss equation comes from
//! finite differences of the first-kind Christoffel symbols, so it never sees
//! A. Normal curvature comes from the normal projector P = I − F_i g^ij F_j:
//! R⊥_ij = P[∂_i P, ∂_j P]P.

use serde::Serialize;

use super::tensor::{self, decode};
use super::{
    covariant_derivative, covariant_hessian, laplacian, scalar_field, GeometryBundle, Immersion,
};
use crate::error::{Error, Result};
use crate::grid::{self, GridField};

/// Sup and dμ-weighted RMS of a pointwise residual magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualNorm {
    pub linf: f64,
    pub l2: f64,
}

impl ResidualNorm {
    pub const ZERO: ResidualNorm = ResidualNorm { linf: 0.0, l2: 0.0 };

    /// `mags` holds one nonnegative magnitude per node; nodes outside
    /// `mask` are ignored.
    pub fn from_magnitudes(bundle: &GeometryBundle, mags: &[f64], mask: &[bool]) -> ResidualNorm {
        let chart = bundle.chart();
        let mut linf: f64 = 0.0;
        let mut num = 0.0;
        let mut den = 0.0;
        for node in 0..chart.node_count() {
            if !mask[node] {
                continue;
            }
            linf = linf.max(mags[node]);
            let w = bundle.sqrt_det(node) * chart.cell_weight(node);
            num += mags[node] * mags[node] * w;
            den += w;
        }
        ResidualNorm {
            linf,
            l2: if den > 0.0 { (num / den).sqrt() } else { 0.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureReport {
    pub gauss: ResidualNorm,
    /// Normal part of ∇_i A_jk − ∇_j A_ik.
    pub codazzi: ResidualNorm,
    /// ⟨∇_i A_jk, F_l⟩ + ⟨A_jk, A_il⟩, the tangential companion.
    pub codazzi_tangential: ResidualNorm,
    pub ricci: ResidualNorm,
    pub simons: ResidualNorm,
    pub simons2: ResidualNorm,
    /// κ = max |A| over the nodes that enter the norms.
    pub curvature_scale: f64,
}

impl CurvatureReport {
    /// Each residual divided by κ to the power of its curvature weight
    /// (2 for the first four, 3 for Simons, 4 for the second Simons
    /// identity). Flat immersions are returned unchanged.
    pub fn relative(&self) -> CurvatureReport {
        let k = self.curvature_scale;
        let div = |r: ResidualNorm, w: i32| {
            if k > 0.0 {
                let s = k.powi(w);
                ResidualNorm {
                    linf: r.linf / s,
                    l2: r.l2 / s,
                }
            } else {
                r
            }
        };
        CurvatureReport {
            gauss: div(self.gauss, 2),
            codazzi: div(self.codazzi, 2),
            codazzi_tangential: div(self.codazzi_tangential, 2),
            ricci: div(self.ricci, 2),
            simons: div(self.simons, 3),
            simons2: div(self.simons2, 4),
            curvature_scale: 1.0,
        }
    }

    pub fn entries(&self) -> [(&'static str, ResidualNorm); 6] {
        [
            ("gauss", self.gauss),
            ("codazzi", self.codazzi),
            ("codazzi_tangential", self.codazzi_tangential),
            ("ricci", self.ricci),
            ("simons", self.simons),
            ("simons2", self.simons2),
        ]
    }
}

/// Intrinsic Riemann tensor R_ijkl per node, from Γ and ∂Γ only.
///
/// R_ijkl = ∂_k Γ_{i,lj} − ∂_l Γ_{i,kj} − Γ_{p,ki} Γ^p_lj + Γ_{p,li} Γ^p_kj,
/// the index-lowered form of
/// R^p_jkl = ∂_k Γ^p_lj − ∂_l Γ^p_kj + Γ^p_kq Γ^q_lj − Γ^p_lq Γ^q_kj.
pub fn riemann(bundle: &GeometryBundle) -> GridField {
    let m = bundle.m();
    let chr = &bundle.christoffel;
    let d = grid::first_partials(&chr.first);
    let nodes = bundle.node_count();
    let m4 = m.pow(4);
    let mut out = vec![0.0; nodes * m4];
    let g1 = |node: usize, k: usize, i: usize, j: usize| chr.first.at(node)[(k * m + i) * m + j];
    for node in 0..nodes {
        let o = &mut out[node * m4..(node + 1) * m4];
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        let mut v =
                            d[k].at(node)[(i * m + l) * m + j] - d[l].at(node)[(i * m + k) * m + j];
                        for p in 0..m {
                            v -= g1(node, p, k, i) * chr.get(node, p, l, j);
                            v += g1(node, p, l, i) * chr.get(node, p, k, j);
                        }
                        o[((i * m + j) * m + k) * m + l] = v;
                    }
                }
            }
        }
    }
    let chart = bundle.chart();
    GridField::from_parts(chart.clone(), m4, out).with_pole_parity(tensor::parity(chart, 4, 1))
}

/// R_ij = g^kl R_ikjl.
pub fn ricci_tensor(bundle: &GeometryBundle, riem: &GridField) -> GridField {
    let m = bundle.m();
    let nodes = bundle.node_count();
    let mut out = vec![0.0; nodes * m * m];
    for node in 0..nodes {
        let r = riem.at(node);
        let gi = bundle.ginv(node);
        for i in 0..m {
            for j in 0..m {
                let mut s = 0.0;
                for k in 0..m {
                    for l in 0..m {
                        s += gi[k * m + l] * r[((i * m + k) * m + j) * m + l];
                    }
                }
                out[node * m * m + i * m + j] = s;
            }
        }
    }
    let chart = bundle.chart();
    GridField::from_parts(chart.clone(), m * m, out).with_pole_parity(tensor::parity(chart, 2, 1))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projects every ambient slot of a rank-r tensor at one node onto the normal space.
fn project_normal(bundle: &GeometryBundle, node: usize, t: &[f64], n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(t.len());
    for chunk in t.chunks(n) {
        out.extend(bundle.normal_at(node, chunk));
    }
    out
}

/// Norm of the normal part of ∇A, per node.
pub(crate) fn normal_grad_a_norm2(bundle: &GeometryBundle, grad_a: &GridField) -> Vec<f64> {
    let (m, n) = (bundle.m(), bundle.n());
    (0..bundle.node_count())
        .map(|node| {
            let p = project_normal(bundle, node, grad_a.at(node), n);
            tensor::norm2(bundle.ginv(node), &p, m, 3, n)
        })
        .collect()
}

/// |⟨A_ij, A_kl⟩|² and the commutator norm |A^α_ik A^β_j^k − A^β_ik A^α_j^k|², per node.
pub(crate) fn quadratic_a_terms(bundle: &GeometryBundle, node: usize) -> (f64, f64) {
    let (m, n) = (bundle.m(), bundle.n());
    let a = bundle.a(node);
    let gi = bundle.ginv(node);
    let av = |i: usize, j: usize| &a[(i * m + j) * n..(i * m + j + 1) * n];
    let mut inner = vec![0.0; m.pow(4)];
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for l in 0..m {
                    inner[((i * m + j) * m + k) * m + l] = dot(av(i, j), av(k, l));
                }
            }
        }
    }
    let inner2 = tensor::norm2(gi, &inner, m, 4, 1);
    let comm = commutator(bundle, node);
    (inner2, tensor::norm2(gi, &comm, m, 2, n * n))
}

/// g^kl(A^α_ik A^β_jl − A^β_ik A^α_jl), layout `[i][j][α][β]`. Swapping
/// the dummy pair shows this also equals g^kl(A^α_ik A^β_jl − A^α_jk A^β_il).
fn commutator(bundle: &GeometryBundle, node: usize) -> Vec<f64> {
    let (m, n) = (bundle.m(), bundle.n());
    let a = bundle.a(node);
    let gi = bundle.ginv(node);
    let mut c = vec![0.0; m * m * n * n];
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for l in 0..m {
                    let w = gi[k * m + l];
                    if w == 0.0 {
                        continue;
                    }
                    for al in 0..n {
                        for be in 0..n {
                            let v = a[(i * m + k) * n + al] * a[(j * m + l) * n + be]
                                - a[(i * m + k) * n + be] * a[(j * m + l) * n + al];
                            c[((i * m + j) * n + al) * n + be] += w * v;
                        }
                    }
                }
            }
        }
    }
    c
}

/// Pointwise residual magnitudes, one vector per equation in report order.
#[derive(Debug, Clone)]
pub struct StructureFields {
    pub gauss: Vec<f64>,
    pub codazzi: Vec<f64>,
    pub codazzi_tangential: Vec<f64>,
    pub ricci: Vec<f64>,
    pub simons: Vec<f64>,
    pub simons2: Vec<f64>,
    pub mask: Vec<bool>,
}

/// Discretization residuals of every structure equation.
pub fn structure_residuals(imm: &Immersion, bundle: &GeometryBundle) -> Result<CurvatureReport> {
    if imm.node_count() != bundle.node_count() || imm.n() != bundle.n() {
        return Err(Error::Usage(
            "structure_residuals: bundle was built from a different immersion".into(),
        ));
    }
    let f = structure_fields(bundle)?;
    let norm = |v: &[f64]| ResidualNorm::from_magnitudes(bundle, v, &f.mask);
    Ok(CurvatureReport {
        gauss: norm(&f.gauss),
        codazzi: norm(&f.codazzi),
        codazzi_tangential: norm(&f.codazzi_tangential),
        ricci: norm(&f.ricci),
        simons: norm(&f.simons),
        simons2: norm(&f.simons2),
        curvature_scale: (0..bundle.node_count())
            .filter(|&i| f.mask[i])
            .map(|i| bundle.norm_a2(i).sqrt())
            .fold(0.0, f64::max),
    })
}

pub fn structure_fields(bundle: &GeometryBundle) -> Result<StructureFields> {
    let (m, n) = (bundle.m(), bundle.n());
    let chart = bundle.chart().clone();
    let nodes = chart.node_count();
    let layer = chart.boundary_layer(4);
    let mask: Vec<bool> = (0..nodes).map(|i| chart.is_interior(i, layer)).collect();

    let riem = riemann(bundle);
    let ric = ricci_tensor(bundle, &riem);
    let grad_a = covariant_derivative(bundle, &bundle.second, 2);
    let grad2_a = covariant_derivative(bundle, &grad_a, 3);
    let hess_h = covariant_hessian(bundle, &bundle.mean.h)?;
    let grad_ric = covariant_derivative(bundle, &ric, 2);
    let lap_a2 = laplacian(bundle, &scalar_field(&chart, bundle.mean.norm_a2.clone()))?;

    // Normal projector field and its derivatives.
    let mut pvals = Vec::with_capacity(nodes * n * n);
    for node in 0..nodes {
        pvals.extend(bundle.normal_projector(node));
    }
    let pfield = GridField::from_parts(chart.clone(), n * n, pvals);
    let dp = grid::first_partials(&pfield);

    let mut gauss = vec![0.0; nodes];
    let mut codazzi = vec![0.0; nodes];
    let mut codazzi_t = vec![0.0; nodes];
    let mut ricci = vec![0.0; nodes];
    let mut simons = vec![0.0; nodes];
    let mut simons2 = vec![0.0; nodes];
    let mut idx = [0usize; 8];

    for node in 0..nodes {
        let gi = bundle.ginv(node);
        let a = bundle.a(node);
        let av = |i: usize, j: usize| &a[(i * m + j) * n..(i * m + j + 1) * n];
        let r = riem.at(node);
        let ra = |i: usize, j: usize, k: usize, l: usize| r[((i * m + j) * m + k) * m + l];

        // Gauss: R_ijkl = ⟨A_ik, A_jl⟩ − ⟨A_il, A_jk⟩.
        let mut res = vec![0.0; m.pow(4)];
        for (flat, slot) in res.iter_mut().enumerate() {
            decode(m, 4, flat, &mut idx);
            let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
            *slot = ra(i, j, k, l) - (dot(av(i, k), av(j, l)) - dot(av(i, l), av(j, k)));
        }
        gauss[node] = tensor::norm2(gi, &res, m, 4, 1).max(0.0).sqrt();

        // Codazzi, normal part: (∇_i A_jk − ∇_j A_ik)⊥ = 0.
        let ga = grad_a.at(node);
        let gav = |i: usize, j: usize, k: usize| {
            &ga[((i * m + j) * m + k) * n..((i * m + j) * m + k + 1) * n]
        };
        let mut cod = Vec::with_capacity(m * m * m * n);
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let diff: Vec<f64> = gav(i, j, k)
                        .iter()
                        .zip(gav(j, i, k))
                        .map(|(x, y)| x - y)
                        .collect();
                    cod.extend(bundle.normal_at(node, &diff));
                }
            }
        }
        codazzi[node] = tensor::norm2(gi, &cod, m, 3, n).max(0.0).sqrt();

        // Tangential companion: ⟨∇_i A_jk, F_l⟩ = −⟨A_jk, A_il⟩.
        for (flat, slot) in res.iter_mut().enumerate() {
            decode(m, 4, flat, &mut idx);
            let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
            *slot = dot(gav(i, j, k), bundle.tangent(node, l)) + dot(av(j, k), av(i, l));
        }
        codazzi_t[node] = tensor::norm2(gi, &res, m, 4, 1).max(0.0).sqrt();

        // Ricci: P[∂_i P, ∂_j P]P = g^kl(A_ik A_jlᵀ − A_jk A_ilᵀ).
        let p = pfield.at(node);
        let mut ric_res = vec![0.0; m * m * n * n];
        for i in 0..m {
            for j in 0..m {
                let (pi, pj) = (dp[i].at(node), dp[j].at(node));
                let comm = mat_sub(&mat_mul(pi, pj, n), &mat_mul(pj, pi, n));
                let rperp = mat_mul(&mat_mul(p, &comm, n), p, n);
                let off = (i * m + j) * n * n;
                ric_res[off..off + n * n].copy_from_slice(&rperp);
            }
        }
        let mcomm = commutator(bundle, node);
        for (x, y) in ric_res.iter_mut().zip(&mcomm) {
            *x -= y;
        }
        ricci[node] = tensor::norm2(gi, &ric_res, m, 2, n * n).max(0.0).sqrt();

        // Simons: ∇_k∇_l H = ΔA_kl + 2R_k^i_l^j A_ij − R^p_k A_pl − R^p_l A_pk
        //                    − (∇_k R^p_l + ∇_l R^p_k − ∇^p R_kl) F_p.
        let hh = hess_h.at(node);
        let g2 = grad2_a.at(node);
        let rc = ric.at(node);
        let grc = grad_ric.at(node);
        let mut sres = vec![0.0; m * m * n];
        for k in 0..m {
            for l in 0..m {
                for al in 0..n {
                    let mut lap = 0.0;
                    for i in 0..m {
                        for j in 0..m {
                            lap += gi[i * m + j] * g2[(((i * m + j) * m + k) * m + l) * n + al];
                        }
                    }
                    let mut curv = 0.0;
                    for i in 0..m {
                        for j in 0..m {
                            let mut rup = 0.0;
                            for s in 0..m {
                                for t in 0..m {
                                    rup += gi[s * m + i] * gi[t * m + j] * ra(k, s, l, t);
                                }
                            }
                            curv += 2.0 * rup * av(i, j)[al];
                        }
                    }
                    let mut ricterm = 0.0;
                    let mut tang = 0.0;
                    for p in 0..m {
                        let mut rpk = 0.0;
                        let mut rpl = 0.0;
                        let mut grad_combo = 0.0;
                        for q in 0..m {
                            let w = gi[p * m + q];
                            rpk += w * rc[q * m + k];
                            rpl += w * rc[q * m + l];
                            grad_combo += w
                                * (grc[(k * m + q) * m + l] + grc[(l * m + q) * m + k]
                                    - grc[(q * m + k) * m + l]);
                        }
                        ricterm += rpk * av(p, l)[al] + rpl * av(p, k)[al];
                        tang += grad_combo * bundle.tangent(node, p)[al];
                    }
                    let rhs = lap + curv - ricterm - tang;
                    sres[(k * m + l) * n + al] = hh[(k * m + l) * n + al] - rhs;
                }
            }
        }
        simons[node] = tensor::norm2(gi, &sres, m, 2, n).max(0.0).sqrt();

        // Second Simons identity, contracted with A.
        let hup = tensor::raise_all(gi, hh, m, 2, n);
        let lhs = 2.0 * dot(a, &hup);
        let grad_perp2 = {
            let pr = project_normal(bundle, node, ga, n);
            tensor::norm2(gi, &pr, m, 3, n)
        };
        let mut t1 = vec![0.0; m.pow(4)];
        for (flat, slot) in t1.iter_mut().enumerate() {
            decode(m, 4, flat, &mut idx);
            let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
            *slot = dot(av(i, j), av(k, l)) - dot(av(i, l), av(j, k));
        }
        let t1n = tensor::norm2(gi, &t1, m, 4, 1);
        let comm2 = tensor::norm2(gi, &commutator(bundle, node), m, 2, n * n);
        let h = bundle.h(node);
        let mut b = vec![0.0; m * m];
        let mut bc = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                b[i * m + j] = dot(h, av(i, j));
                let mut c = 0.0;
                for k in 0..m {
                    for l in 0..m {
                        c += gi[k * m + l] * dot(av(i, k), av(j, l));
                    }
                }
                bc[i * m + j] = b[i * m + j] - c;
            }
        }
        let rhs = lap_a2.at(node)[0] - 2.0 * grad_perp2
            + t1n
            + comm2
            + 2.0 * tensor::norm2(gi, &bc, m, 2, 1)
            - 2.0 * tensor::norm2(gi, &b, m, 2, 1);
        simons2[node] = (lhs - rhs).abs();
    }

    Ok(StructureFields {
        gauss,
        codazzi,
        codazzi_tangential: codazzi_t,
        ricci,
        simons,
        simons2,
        mask,
    })
}

fn mat_mul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

fn mat_sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}
