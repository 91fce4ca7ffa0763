//! Segmentation and feature extraction checked against the generator's own
//! cycle layout.

use soh_adapt::features::{
    build_feature_vector, cycle_q_age, cycle_q_c20, segment_cycles, CycleType, SegmentationConfig,
};
use soh_adapt::synth::{generate, FleetSpec};
use soh_adapt::trajectory::TimeSample;
use soh_adapt::Error;

fn small_fleet(noise: f64) -> soh_adapt::synth::SyntheticFleet {
    generate(&FleetSpec {
        n_cells: 3,
        cycles_per_cell: 25,
        rpt_interval: 10,
        noise_sigma: noise,
        ..FleetSpec::default()
    })
    .unwrap()
}

#[test]
fn segmentation_reproduces_generator_layout() {
    let fleet = small_fleet(0.1);
    for cell in &fleet.cells {
        let seg = segment_cycles(&cell.cell_id, &cell.samples, &SegmentationConfig::default()).unwrap();
        assert_eq!(seg.len(), cell.cycles.len());
        for (a, b) in seg.iter().zip(&cell.cycles) {
            assert_eq!(a.cycle_index, b.cycle_index);
            assert_eq!(a.cycle_type, b.cycle_type);
            assert_eq!(a.samples, b.samples);
            assert_eq!(a.t_ch, b.t_ch);
            assert_eq!(a.t_dis, b.t_dis);
            assert!((a.ah_at_charge - b.ah_at_charge).abs() <= 1e-9 * b.ah_at_charge.max(1.0));
            assert!((a.ah_end - b.ah_end).abs() <= 1e-9 * b.ah_end.max(1.0));
        }
    }
}

#[test]
fn noisy_charges_are_recovered() {
    let fleet = small_fleet(0.3);
    for cell in &fleet.cells {
        let seg = segment_cycles(&cell.cell_id, &cell.samples, &SegmentationConfig::default()).unwrap();
        let q: Vec<f64> = seg
            .iter()
            .filter(|c| c.cycle_type == CycleType::Aging)
            .map(|c| cycle_q_age(c).unwrap())
            .collect();
        for (got, want) in q.iter().zip(cell.q_age.values()) {
            assert!((got - want).abs() <= 1e-9 * want);
        }
        let caps: Vec<f64> = seg
            .iter()
            .filter(|c| c.cycle_type == CycleType::C20Capacity)
            .map(|c| cycle_q_c20(c).unwrap())
            .collect();
        assert_eq!(caps.len(), cell.capacity.len());
        assert!((caps[0] - cell.q0).abs() <= 1e-9 * cell.q0);
    }
}

#[test]
fn c20_capacity_scales_with_duration() {
    let cfg = SegmentationConfig::default();
    let i = cfg.c20_current();
    let stream = |hours: f64| {
        let mut s = vec![TimeSample::new(0.0, 0.0, 3.7, 25.0), TimeSample::new(1200.0, 0.0, 3.7, 25.0)];
        let t = 1200.0;
        let end = t + hours * 3600.0;
        s.push(TimeSample::new(t + 1e-6, i, 3.7, 25.0));
        s.push(TimeSample::new(end, i, 3.7, 25.0));
        s.push(TimeSample::new(end + 1e-6, 0.0, 3.7, 25.0));
        s.push(TimeSample::new(end + 300.0, 0.0, 3.7, 25.0));
        s.push(TimeSample::new(end + 300.0 + 1e-6, -i, 3.7, 25.0));
        s.push(TimeSample::new(2.0 * end, -i, 3.7, 25.0));
        s.push(TimeSample::new(2.0 * end + 1e-6, 0.0, 3.7, 25.0));
        s.push(TimeSample::new(2.0 * end + 1200.0, 0.0, 3.7, 25.0));
        s
    };
    let full = segment_cycles("c", &stream(20.0), &cfg).unwrap();
    let half = segment_cycles("c", &stream(10.0), &cfg).unwrap();
    assert_eq!(full[0].cycle_type, CycleType::C20Capacity);
    let (qf, qh) = (cycle_q_c20(&full[0]).unwrap(), cycle_q_c20(&half[0]).unwrap());
    assert!((qf - 33.1).abs() < 1e-6, "{qf}");
    assert!((qh - qf / 2.0).abs() < 1e-6);
    assert!(matches!(
        build_feature_vector(&full[0], None),
        Err(Error::WrongCycleType { .. })
    ));
}

#[test]
fn generated_features_are_lagged() {
    let fleet = small_fleet(0.1);
    let cell = &fleet.cells[0];
    let aging: Vec<_> = cell
        .cycles
        .iter()
        .filter(|c| c.cycle_type == CycleType::Aging)
        .collect();
    let first = build_feature_vector(aging[0], None).unwrap();
    assert!(first.entries[5..].iter().all(|&v| v == 0.0));
    for w in aging.windows(2) {
        let prev = build_feature_vector(w[0], None).unwrap();
        let cur = build_feature_vector(w[1], Some(w[0])).unwrap();
        assert_eq!(cur.entries[5..], prev.entries[..5]);
        assert_eq!(cur.ah, w[1].ah_at_charge);
    }
}
