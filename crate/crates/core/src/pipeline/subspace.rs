use crate::error::{arg_err, dim_err, Result};
use crate::spectral::{Field, Slices};
use crate::tensor::Tensor3;
use crate::tlinalg::{
    mul_a_bh, mul_ah_b, skinny_slices, tensor_spectral_norm, with_field, DEFAULT_RANK_TOL,
};
use crate::transforms::TransformSpec;

const ORTHONORMAL_TOL: f64 = 1e-8;

fn check_orthonormal<A: Field>(u: &Slices<A>) -> Result<()> {
    let (_, r, n3) = u.dims();
    for k in 0..n3 {
        let g = mul_ah_b(&u.slice(k), &u.slice(k));
        for i in 0..r {
            for j in 0..r {
                let target = if i == j { 1.0 } else { 0.0 };
                if (g[[i, j]] - A::from_real(target)).abs() > ORTHONORMAL_TOL {
                    return Err(arg_err("basis is not column-orthonormal"));
                }
            }
        }
    }
    Ok(())
}

/// `||P1 - P2||_F / ||P1||_F` for the projectors `U U^H` of two orthonormal
/// bases, evaluated slice by slice in the transform domain (`tau` cancels).
fn projector_ratio<A: Field>(u1: &Slices<A>, u2: &Slices<A>) -> f64 {
    let n3 = u1.dims().2;
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..n3 {
        let p1 = mul_a_bh(&u1.slice(k), &u1.slice(k));
        let p2 = mul_a_bh(&u2.slice(k), &u2.slice(k));
        den += p1.iter().map(|v| v.square()).sum::<f64>();
        num += p1
            .iter()
            .zip(p2.iter())
            .map(|(a, b)| (*a - *b).square())
            .sum::<f64>();
    }
    if den > 0.0 {
        (num / den).sqrt()
    } else {
        num.sqrt()
    }
}

fn projector_in<A: Field>(u1: &Tensor3, u2: &Tensor3, spec: &TransformSpec) -> Result<f64> {
    let a = A::forward(spec, u1)?;
    let b = A::forward(spec, u2)?;
    check_orthonormal(&a)?;
    check_orthonormal(&b)?;
    Ok(projector_ratio(&a, &b))
}

/// Relative distance between the projectors onto two orthonormal tensor bases.
pub fn projector_distance(u1: &Tensor3, u2: &Tensor3, spec: &TransformSpec) -> Result<f64> {
    if u1.n1() != u2.n1() || u1.n3() != spec.n3() || u2.n3() != spec.n3() {
        return Err(dim_err(format!("{:?} vs {:?}", u1.dims(), u2.dims())));
    }
    with_field!(spec, projector_in(u1, u2, spec))
}

fn rowspace_in<A: Field>(v0: &Tensor3, z: &Tensor3, spec: &TransformSpec) -> Result<f64> {
    let v = A::forward(spec, v0)?;
    check_orthonormal(&v)?;
    let zb = A::forward(spec, z)?;
    let u = skinny_slices(spec, &zb, DEFAULT_RANK_TOL)?.u;
    Ok(projector_ratio(&v, &u))
}

/// `||V0*V0^H - U*U^H||_F / ||V0*V0^H||_F` with `U` an orthonormal basis of
/// the column space of `z_star`.
pub fn rowspace_error(v0: &Tensor3, z_star: &Tensor3, spec: &TransformSpec) -> Result<f64> {
    let (n2, m2, n3) = z_star.dims();
    if n2 != m2 || v0.n1() != n2 || v0.n3() != n3 || n3 != spec.n3() {
        return Err(dim_err(format!(
            "V0 {:?} against Z {:?}",
            v0.dims(),
            z_star.dims()
        )));
    }
    with_field!(spec, rowspace_in(v0, z_star, spec))
}

fn mu_in<A: Field>(l: &Tensor3, spec: &TransformSpec) -> Result<f64> {
    let lb = A::forward(spec, l)?;
    let svd = skinny_slices(spec, &lb, DEFAULT_RANK_TOL)?;
    if svd.rank == 0 {
        return Err(arg_err("incoherence is undefined for a zero tensor"));
    }
    let (n2, r, n3) = svd.v.dims();
    let mut worst = 0.0_f64;
    for j in 0..n2 {
        let mut acc = 0.0;
        for k in 0..n3 {
            acc += svd
                .v
                .slice(k)
                .row(j)
                .iter()
                .map(|v| v.square())
                .sum::<f64>();
        }
        worst = worst.max(acc);
    }
    // ||V^H * e_j||_F^2 = (1/tau) sum_k ||row j of V_bar^(k)||^2
    Ok(n2 as f64 * worst / r as f64)
}

/// Column incoherence `(n2 tau / r) max_j ||V^H * e_j||_F^2`, with `V` from
/// the skinny t-SVD and `e_j` the tensor column basis.
pub fn incoherence_mu(l: &Tensor3, spec: &TransformSpec) -> Result<f64> {
    if l.n3() != spec.n3() {
        return Err(dim_err("tube length does not match transform"));
    }
    with_field!(spec, mu_in(l, spec))
}

/// Spectral norm of `E` with every column in `theta` scaled to unit
/// Frobenius norm and every other column zeroed.
pub fn ambiguity_norm(e: &Tensor3, theta: &[usize], spec: &TransformSpec) -> Result<f64> {
    let n2 = e.n2();
    let norms = e.column_sq_norms();
    let mut factors = vec![0.0; n2];
    for &j in theta {
        if j >= n2 {
            return Err(arg_err(format!("index {j} out of range for n2 = {n2}")));
        }
        if norms[j] == 0.0 {
            return Err(arg_err(format!(
                "column {j} is zero but listed as supported"
            )));
        }
        factors[j] = 1.0 / norms[j].sqrt();
    }
    let mut b = e.clone();
    b.scale_columns(&factors);
    tensor_spectral_norm(&b, spec)
}
