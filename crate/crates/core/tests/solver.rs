use hme_core::solver1d::{conserved_totals, max_wavespeed, run, Boundary, Grid1D, InitialCondition, Primitive, SimConfig};

fn sine() -> InitialCondition<f64> {
    InitialCondition::Sine {
        rho: 1.0,
        amplitude: 0.2,
        u: 0.0,
        theta: 1.0,
        wavenumber: 1,
    }
}

/// L1 distance between a grid and the pairwise averages of its refinement.
fn l1_to_refined(coarse: &Grid1D<f64>, fine: &Grid1D<f64>) -> f64 {
    let sum: f64 = coarse
        .cells
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let avg = (fine.cells[2 * i].to_vector() + fine.cells[2 * i + 1].to_vector()) * 0.5;
            (c.to_vector() - avg).abs().sum()
        })
        .sum();
    sum * coarse.dx()
}

#[test]
fn smooth_data_converges_at_first_order() {
    let sols: Vec<Grid1D<f64>> = [200, 400, 800]
        .iter()
        .map(|&n| {
            let g = Grid1D::<f64>::from_initial(3, n, 0.0, 1.0, &sine()).unwrap();
            run(&SimConfig::new(3, 1.0, 0.1, Boundary::Periodic), g).unwrap().last().grid.clone()
        })
        .collect();
    let e1 = l1_to_refined(&sols[0], &sols[1]);
    let e2 = l1_to_refined(&sols[1], &sols[2]);
    let order = (e1 / e2).log2();
    assert!(order >= 0.9, "observed order {order}");
}

#[test]
fn shock_tube_stays_inside_characteristic_fan() {
    let (left, right) = (Primitive { rho: 1.0, u: 0.0, theta: 1.0 }, Primitive { rho: 0.125, u: 0.0, theta: 0.8 });
    let ic = InitialCondition::Riemann { x0: 0.5, left, right };
    let n = 400;
    let g0 = Grid1D::<f64>::from_initial(5, n, 0.0, 1.0, &ic).unwrap();
    let cfg = SimConfig::new(5, 1e-3, 0.1, Boundary::Copy);
    let traj = run(&cfg, g0.clone()).unwrap();
    let s: f64 = max_wavespeed(&g0.cells[0]).unwrap().max(max_wavespeed(&g0.cells[n - 1]).unwrap());
    let (lo, hi) = (0.5 - s * 0.1 - g0.dx(), 0.5 + s * 0.1 + g0.dx());
    let end = &traj.last().grid;
    let mut moved = 0;
    for (x, (c, c0)) in end.centers().iter().zip(end.cells.iter().zip(&g0.cells)) {
        if (c.to_vector() - c0.to_vector()).amax() > 1e-4 {
            moved += 1;
            assert!(*x > lo && *x < hi, "disturbance at x = {x} outside [{lo}, {hi}]");
        }
    }
    assert!(moved > 20);
    let (m0, _, _) = conserved_totals(&g0);
    let (m1, _, _) = conserved_totals(end);
    assert!((m1 - m0).abs() < 1e-12);
}

#[test]
fn runs_are_reproducible() {
    let g = Grid1D::<f64>::from_initial(4, 64, 0.0, 1.0, &sine()).unwrap();
    let cfg = SimConfig::new(4, 0.1, 0.05, Boundary::Periodic);
    let a = run(&cfg, g.clone()).unwrap();
    let b = run(&cfg, g).unwrap();
    assert_eq!(a, b);
}
