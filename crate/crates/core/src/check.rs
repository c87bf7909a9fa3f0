//! Geometric feasibility check written directly against the packing
//! constraints: every center at most `R - 1` from the origin and every pair
//! of centers at least 2 apart. Deliberately shares nothing with the energy
//! evaluation it is used to certify.

#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub n: usize,
    pub radius: f64,
    /// `max(2 - |c_i - c_j|)` over pairs, floored at 0.
    pub max_pair_violation: f64,
    /// `max(|c_i| + 1 - R)` over circles, floored at 0.
    pub max_container_violation: f64,
    /// Sum of squared violations with each pair counted from both sides.
    pub total_energy: f64,
    pub worst_pair: Option<(usize, usize)>,
    pub worst_container: Option<usize>,
}

impl CheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_pair_violation <= tolerance && self.max_container_violation <= tolerance
    }
}

pub fn check_centers(centers: &[(f64, f64)], radius: f64) -> CheckReport {
    let mut report = CheckReport {
        n: centers.len(),
        radius,
        max_pair_violation: 0.0,
        max_container_violation: 0.0,
        total_energy: 0.0,
        worst_pair: None,
        worst_container: None,
    };
    for (i, &(xi, yi)) in centers.iter().enumerate() {
        let wall = (xi * xi + yi * yi).sqrt() + 1.0 - radius;
        if wall > 0.0 {
            report.total_energy += wall * wall;
            if wall > report.max_container_violation {
                report.max_container_violation = wall;
                report.worst_container = Some(i);
            }
        }
        for (j, &(xj, yj)) in centers.iter().enumerate().skip(i + 1) {
            let gap = 2.0 - ((xi - xj) * (xi - xj) + (yi - yj) * (yi - yj)).sqrt();
            if gap > 0.0 {
                report.total_energy += 2.0 * gap * gap;
                if gap > report.max_pair_violation {
                    report.max_pair_violation = gap;
                    report.worst_pair = Some((i, j));
                }
            }
        }
    }
    report
}

pub fn check_layout(layout: &crate::Layout, radius: f64) -> CheckReport {
    let raw: Vec<(f64, f64)> = layout.centers().iter().map(|c| (c.x, c.y)).collect();
    check_centers(&raw, radius)
}
