use echosim_core::session::{
    classify_tilt, default_specs, location_ok, notch_ok, select_visualization, FeedbackEvent, Session,
    SessionConfig, TiltClass, Variant, ViewSpec,
};
use echosim_core::ProbePose;
use proptest::prelude::*;

fn spec() -> impl Strategy<Value = ViewSpec> {
    proptest::sample::select(default_specs())
}

fn pose() -> impl Strategy<Value = ProbePose> {
    (-720.0f64..720.0, -90.0f64..90.0, -180.0f64..180.0, proptest::array::uniform5(any::<bool>()))
        .prop_map(|(y, p, r, c)| ProbePose::new(y, p, r, c))
}

/// Poses biased toward the target so that every stage gets exercised.
fn near_pose(spec: ViewSpec) -> impl Strategy<Value = ProbePose> {
    let clock = (spec.notch_clock % 12) as f64 * 30.0;
    let mid = (spec.tilt_lo_deg + spec.tilt_hi_deg) / 2.0;
    (
        prop_oneof![Just(clock), clock - 8.0..clock + 8.0, 0.0f64..360.0],
        prop_oneof![Just(0.0), Just(mid), 0.0f64..60.0],
        prop_oneof![
            4 => Just({
                let mut c = [false; 5];
                c[spec.sensor_index] = true;
                c
            }),
            1 => proptest::array::uniform5(any::<bool>()),
        ],
    )
        .prop_map(|(y, p, c)| ProbePose::new(y, p, 0.0, c))
}

fn scripted(spec: ViewSpec) -> impl Strategy<Value = (ViewSpec, Vec<(ProbePose, f64)>)> {
    proptest::collection::vec((near_pose(spec), prop_oneof![Just(20.0), 1.0f64..300.0]), 1..120)
        .prop_map(move |steps| (spec, steps))
}

const STAGE_EVENTS: [FeedbackEvent; 3] =
    [FeedbackEvent::LocationOk, FeedbackEvent::NotchOk, FeedbackEvent::ViewAcquired];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn displayed_stage_is_a_ratchet((spec, steps) in spec().prop_flat_map(scripted)) {
        let cfg = SessionConfig::default();
        let mut s = Session::new(spec, cfg);
        let mut prev = 0;
        for (p, dt) in &steps {
            s.step(p, *dt);
            let st = s.state();
            prop_assert!(st.stage_max >= prev);
            prop_assert!(st.stage_max <= 3);
            prop_assert_eq!(st.completed, st.stage_max == 3);
            prev = st.stage_max;
        }
        // One stage event per ratchet step, in order.
        let stage_events: Vec<_> = s.state().events().filter(|e| STAGE_EVENTS.contains(e)).collect();
        prop_assert_eq!(&stage_events[..], &STAGE_EVENTS[..prev as usize]);
        s.reset_attempt();
        prop_assert_eq!(s.state().stage_max, 0);
        prop_assert!(!s.state().completed);
    }

    #[test]
    fn advancing_requires_all_earlier_predicates((spec, steps) in spec().prop_flat_map(scripted)) {
        let cfg = SessionConfig::default();
        let mut s = Session::new(spec, cfg);
        let mut held = 0.0;
        for (p, dt) in &steps {
            let before = s.state().stage_max;
            s.step(p, *dt);
            let loc = location_ok(p, &spec);
            let notch = notch_ok(p, &spec, cfg.tol_deg);
            let tilt = classify_tilt(p.tilt_deg(), &spec, cfg.tol_deg) == spec.variant.target_class();
            held = if loc && notch && tilt { held + dt } else { 0.0 };
            let after = s.state().stage_max;
            if after > before {
                prop_assert!(loc);
                if after >= 2 {
                    prop_assert!(notch);
                }
                if after == 3 {
                    prop_assert!(tilt);
                    prop_assert!(held >= cfg.dwell_ms - 1e-6);
                }
            }
        }
    }

    #[test]
    fn notch_ignores_whole_turns(spec in spec(), p in pose(), k in -5i32..5) {
        let turned = ProbePose::new(p.yaw_deg + 360.0 * k as f64, p.pitch_deg, p.roll_deg, p.contacts);
        prop_assert_eq!(notch_ok(&p, &spec, 5.0), notch_ok(&turned, &spec, 5.0));
    }

    #[test]
    fn tilt_classes_partition_the_line(spec in spec(), t in -1e6f64..1e6, tol in 0.0f64..4.99) {
        let a = t.abs();
        let oracle = [
            (TiltClass::NormalView, a <= tol),
            (TiltClass::Undershot, a > tol && a < spec.tilt_lo_deg),
            (TiltClass::TiltView, a >= spec.tilt_lo_deg && a <= spec.tilt_hi_deg),
            (TiltClass::Overshot, a > spec.tilt_hi_deg),
        ];
        prop_assert_eq!(oracle.iter().filter(|o| o.1).count(), 1);
        let want = oracle.iter().find(|o| o.1).unwrap().0;
        prop_assert_eq!(classify_tilt(t, &spec, tol), want);
    }

    #[test]
    fn no_contact_means_no_visualization(spec in spec(), y in -1e4f64..1e4, p in -180.0f64..180.0, r in -180.0f64..180.0) {
        let pose = ProbePose::new(y, p, r, [false; 5]);
        prop_assert_eq!(select_visualization(&spec, &pose, 5.0), None);
    }

    #[test]
    fn dwell_must_be_consecutive(spec in spec(), dt in 5.0f64..100.0) {
        let cfg = SessionConfig::default();
        let clock = (spec.notch_clock % 12) as f64 * 30.0;
        let tilt = match spec.variant {
            Variant::Normal => 0.0,
            Variant::Tilt => (spec.tilt_lo_deg + spec.tilt_hi_deg) / 2.0,
        };
        let mut contacts = [false; 5];
        contacts[spec.sensor_index] = true;
        let good = ProbePose::new(clock, tilt, 0.0, contacts);
        let lifted = ProbePose::new(clock, tilt, 0.0, [false; 5]);

        let steps = ((cfg.dwell_ms - dt) / dt).floor() as usize;
        let mut s = Session::new(spec, cfg);
        for _ in 0..2 {
            for _ in 0..steps {
                s.step(&good, dt);
            }
            s.step(&lifted, dt);
        }
        prop_assert!(!s.state().completed);
        for _ in 0..(cfg.dwell_ms / dt).ceil() as usize {
            s.step(&good, dt);
        }
        prop_assert!(s.state().completed);
    }
}
