//! Launcher validation against exhaustive image-method enumeration.

use rfplan_core::geometry::Geometry;
use rfplan_core::math::fspl_db;
use rfplan_core::rt::{trace_to_points, InteractionKind, RtConfig};
use rfplan_testkit::{enumerate_specular_paths, image_oracle_scenes, open_scene};

fn reflection_cfg(launch: u32) -> RtConfig {
    let mut cfg = RtConfig::new(3.7);
    cfg.launch_count = launch;
    cfg.max_diffractions = 0;
    cfg
}

#[test]
fn launcher_matches_image_enumeration_on_small_scenes() {
    for (name, scene, tx, rx) in image_oracle_scenes() {
        let geo = Geometry::build(&scene).unwrap();
        let oracle = enumerate_specular_paths(&geo, tx, rx, 2);
        let traced = trace_to_points(&geo, tx, &[rx], &reflection_cfg(100_000))
            .unwrap()
            .remove(0);
        // Drop the direct path; compare specular sets.
        let specular: Vec<_> = traced
            .iter()
            .filter(|p| p.specular_order() > 0)
            .collect();
        assert_eq!(
            specular.len(),
            oracle.len(),
            "{name}: traced {:?} vs oracle {:?}",
            specular
                .iter()
                .map(|p| p.signature())
                .collect::<Vec<_>>(),
            oracle.iter().map(|p| &p.facets).collect::<Vec<_>>()
        );
        for (t, o) in specular.iter().zip(oracle.iter()) {
            let t_facets: Vec<u32> = t
                .interactions
                .iter()
                .filter(|i| i.kind == InteractionKind::Reflection)
                .map(|i| i.target)
                .collect();
            assert_eq!(t_facets, o.facets, "{name}");
            assert!(
                (t.length_m - o.length_m).abs() < 1e-3,
                "{name}: length {} vs oracle {}",
                t.length_m,
                o.length_m
            );
        }
    }
}

#[test]
fn specular_reciprocity() {
    // Swapping tx and rx yields the same path set with reversed
    // interaction order and equal gains.
    for (name, scene, tx, rx) in image_oracle_scenes() {
        let geo = Geometry::build(&scene).unwrap();
        let cfg = reflection_cfg(100_000);
        let fwd = trace_to_points(&geo, tx, &[rx], &cfg).unwrap().remove(0);
        let bwd = trace_to_points(&geo, rx, &[tx], &cfg).unwrap().remove(0);
        assert_eq!(fwd.len(), bwd.len(), "{name}");
        for f in &fwd {
            let sig: Vec<u32> = f
                .interactions
                .iter()
                .filter(|i| i.kind == InteractionKind::Reflection)
                .map(|i| i.target)
                .collect();
            let rev: Vec<u32> = sig.iter().rev().cloned().collect();
            let mate = bwd
                .iter()
                .find(|b| {
                    b.interactions
                        .iter()
                        .filter(|i| i.kind == InteractionKind::Reflection)
                        .map(|i| i.target)
                        .collect::<Vec<u32>>()
                        == rev
                })
                .unwrap_or_else(|| panic!("{name}: no reverse mate for {sig:?}"));
            assert!(
                (f.gain_db - mate.gain_db).abs() < 1e-9,
                "{name} {sig:?}: {} vs {}",
                f.gain_db,
                mate.gain_db
            );
            assert!((f.length_m - mate.length_m).abs() < 1e-9);
        }
    }
}

#[test]
fn free_space_exactness_across_distances() {
    let geo = Geometry::build(&open_scene(200.0)).unwrap();
    let cfg = reflection_cfg(1000);
    let tx = rfplan_core::Vec3::new(0.0, 0.0, 0.0);
    for k in 0..50 {
        let d = 10f64.powf(k as f64 / 49.0 * 2.0); // 1..100 m, log spaced
        let rx = rfplan_core::Vec3::new(d, 0.0, 0.0);
        let paths = trace_to_points(&geo, tx, &[rx], &cfg).unwrap().remove(0);
        assert_eq!(paths.len(), 1);
        let total = rfplan_core::rt::aggregate_channel_gain(&paths);
        assert!(
            (total + fspl_db(d, 3.7)).abs() < 1e-9,
            "d = {d}: {total} vs {}",
            -fspl_db(d, 3.7)
        );
    }
}
