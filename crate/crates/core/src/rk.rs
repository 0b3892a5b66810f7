//! Dormand–Prince 5(4) step for a two-dimensional autonomous system.

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// difference between the 5th and embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

pub type State = [f64; 2];

fn axpy(y: &State, h: f64, terms: &[(f64, &State)]) -> State {
    let mut out = *y;
    for (c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

/// One step of size `h`. Returns the fifth-order solution and the local error estimate.
pub fn dopri_step<F>(f: &F, y: &State, h: f64) -> Result<(State, State), crate::Error>
where
    F: Fn(&State) -> Result<State, crate::Error>,
{
    let k1 = f(y)?;
    let k2 = f(&axpy(y, h, &[(A21, &k1)]))?;
    let k3 = f(&axpy(y, h, &[(A31, &k1), (A32, &k2)]))?;
    let k4 = f(&axpy(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]))?;
    let k5 = f(&axpy(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]))?;
    let k6 = f(&axpy(y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]))?;
    let y5 = axpy(y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = f(&y5)?;
    let err = [
        h * (E1 * k1[0] + E3 * k3[0] + E4 * k4[0] + E5 * k5[0] + E6 * k6[0] + E7 * k7[0]),
        h * (E1 * k1[1] + E3 * k3[1] + E4 * k4[1] + E5 * k5[1] + E6 * k6[1] + E7 * k7[1]),
    ];
    Ok((y5, err))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_fifth_order() {
        let f = |y: &State| Ok([y[1], -y[0]]);
        let run = |m: usize| {
            let h = 1.0 / m as f64;
            let mut y = [1.0, 0.0];
            for _ in 0..m {
                y = dopri_step(&f, &y, h).unwrap().0;
            }
            (y[0] - 1f64.cos()).abs()
        };
        let order = (run(10) / run(20)).log2();
        assert!(order > 4.7, "order {order}");
    }

    #[test]
    fn error_estimate_is_small_for_small_steps() {
        let f = |y: &State| Ok([y[1], -y[0]]);
        let (_, e) = dopri_step(&f, &[1.0, 0.0], 1e-2).unwrap();
        assert!(e[0].abs() < 1e-10 && e[1].abs() < 1e-10);
    }
}
