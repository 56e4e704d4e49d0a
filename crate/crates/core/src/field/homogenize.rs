use super::{GridField, Profile1D};

/// Row means ⟨f⟩(y_j) = (1/N) Σᵢ f(xᵢ, y_j).
pub fn x_average(f: &GridField) -> Profile1D {
    let n = f.n_side();
    let values = (0..n).map(|j| f.row(j).iter().sum::<f64>() / n as f64).collect();
    Profile1D::new(f.box_size(), values)
}

/// Extend a y-profile constantly in x.
pub fn broadcast(profile: &Profile1D) -> GridField {
    let n = profile.n_side();
    let mut values = Vec::with_capacity(n * n);
    for &v in profile.values() {
        values.extend(std::iter::repeat_n(v, n));
    }
    GridField::new(n, profile.box_size(), values).expect("profile values are finite")
}

/// f∼ = f − ⟨f⟩.
pub fn remainder(f: &GridField) -> GridField {
    let avg = x_average(f);
    let n = f.n_side();
    let mut out = f.clone();
    for (j, &mean) in avg.values().iter().enumerate() {
        for v in &mut out.values_mut()[j * n..(j + 1) * n] {
            *v -= mean;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogenizationNorms {
    /// ‖c∼‖∞
    pub sup_rem: f64,
    /// ‖∂_y c∼‖∞ with centered differences.
    pub sup_dy_rem: f64,
}

pub fn homogenization_norms(c: &GridField) -> HomogenizationNorms {
    let rem = remainder(c);
    let h = rem.spacing();
    let n = rem.n_side() as isize;
    let mut sup_dy: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            let d = (rem.at(i, j + 1) - rem.at(i, j - 1)) / (2.0 * h);
            sup_dy = sup_dy.max(d.abs());
        }
    }
    HomogenizationNorms {
        sup_rem: rem.sup_norm(),
        sup_dy_rem: sup_dy,
    }
}
