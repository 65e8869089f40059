//! Small fixed-size complex matrices.

use nalgebra::{Matrix2, Matrix4, SMatrix};

use crate::{Error, Result, C64};

pub type M2 = Matrix2<C64>;
pub type M4 = Matrix4<C64>;
pub type M8 = SMatrix<C64, 8, 8>;

/// The four 2x2 blocks `(uu, uv, vu, vv)` of a tangent matrix.
pub fn blocks(m: &M4) -> (M2, M2, M2, M2) {
    (
        m.fixed_view::<2, 2>(0, 0).into_owned(),
        m.fixed_view::<2, 2>(0, 2).into_owned(),
        m.fixed_view::<2, 2>(2, 0).into_owned(),
        m.fixed_view::<2, 2>(2, 2).into_owned(),
    )
}

pub fn from_blocks(uu: &M2, uv: &M2, vu: &M2, vv: &M2) -> M4 {
    let mut m = M4::zeros();
    m.fixed_view_mut::<2, 2>(0, 0).copy_from(uu);
    m.fixed_view_mut::<2, 2>(0, 2).copy_from(uv);
    m.fixed_view_mut::<2, 2>(2, 0).copy_from(vu);
    m.fixed_view_mut::<2, 2>(2, 2).copy_from(vv);
    m
}

pub fn diag2(a: C64, b: C64) -> M2 {
    M2::new(a, C64::new(0.0, 0.0), C64::new(0.0, 0.0), b)
}

pub fn inv2(m: &M2) -> Result<M2> {
    let d = m.determinant();
    let scale = m.iter().map(|x| x.norm()).fold(0.0, f64::max).max(1e-300);
    if d.norm() < 1e-13 * scale * scale {
        return Err(Error::SingularJacobian);
    }
    Ok(M2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / d)
}

pub fn max_abs<const R: usize, const C: usize>(m: &SMatrix<C64, R, C>) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}
