use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use turtle_synth::{
    enumerate_commands, hausdorff, hausdorff_below, interpret, parse_commands, sample_command, ArgumentMode,
    CommandModel, EditCommand, Point, RenderConfig, Workspace,
};

fn point() -> impl Strategy<Value = Point> {
    (-500.0f64..500.0, -500.0f64..500.0).prop_map(|(x, y)| Point::new(x, y))
}

fn point_set() -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec(point(), 1..40)
}

/// A workspace built by following enumerated commands chosen by index.
fn workspace() -> impl Strategy<Value = Workspace> {
    prop::collection::vec(any::<prop::sample::Index>(), 0..20).prop_map(|picks| {
        let mut w = Workspace::new();
        for pick in picks {
            let cmds = enumerate_commands(&w);
            w.apply_in_place(&cmds[pick.index(cmds.len())]).unwrap();
        }
        w
    })
}

proptest! {
    #[test]
    fn hausdorff_is_symmetric(x in point_set(), y in point_set()) {
        prop_assert_eq!(hausdorff(&x, &y).unwrap(), hausdorff(&y, &x).unwrap());
    }

    #[test]
    fn hausdorff_triangle_inequality(x in point_set(), y in point_set(), z in point_set()) {
        let xz = hausdorff(&x, &z).unwrap();
        let bound = hausdorff(&x, &y).unwrap() + hausdorff(&y, &z).unwrap();
        prop_assert!(xz <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn hausdorff_of_a_set_with_itself_is_zero(x in point_set()) {
        prop_assert_eq!(hausdorff(&x, &x).unwrap(), 0.0);
        prop_assert!(!hausdorff_below(&x, &x, 0.0).unwrap());
    }

    #[test]
    fn below_matches_exact_distance(x in point_set(), y in point_set(), scale in 0.0f64..2.0) {
        let d = hausdorff(&x, &y).unwrap();
        let alpha = d * scale;
        prop_assert_eq!(hausdorff_below(&x, &y, alpha).unwrap(), d < alpha);
    }

    #[test]
    fn commands_conserve_blocks(w in workspace()) {
        for c in enumerate_commands(&w) {
            let next = w.apply(&c).unwrap();
            prop_assert!(next.validate().is_ok(), "{c} left an invalid workspace");
            let expected = match c {
                EditCommand::Get(_) => w.len() + 1,
                EditCommand::Remove(id) => w.len() - w.subtree(id).len(),
                _ => w.len(),
            };
            prop_assert_eq!(next.len(), expected, "{}", c);
        }
    }

    #[test]
    fn disconnect_after_connect_keeps_every_block(w in workspace()) {
        for c in enumerate_commands(&w) {
            if let EditCommand::ConnectUnder { source, .. } = c {
                let moved = w.apply(&c).unwrap();
                let back = moved.apply(&EditCommand::Disconnect(source)).unwrap();
                prop_assert_eq!(back.len(), w.len());
                prop_assert!(back.is_root(source));
                let mut before: Vec<_> = w.ids().collect();
                let mut after: Vec<_> = back.ids().collect();
                before.sort();
                after.sort();
                prop_assert_eq!(before, after);
            }
        }
    }

    #[test]
    fn command_text_round_trips(w in workspace()) {
        for c in enumerate_commands(&w) {
            let text = c.to_string();
            prop_assert_eq!(text.parse::<EditCommand>().unwrap(), c);
            prop_assert_eq!(parse_commands(&text).unwrap(), vec![c]);
        }
    }

    #[test]
    fn drawing_starts_at_origin(w in workspace()) {
        let t = interpret(&w, &RenderConfig::default());
        prop_assert_eq!(t.points[0], Point::new(0.0, 0.0));
        prop_assert_eq!((t.points.len() - 1) % 10, 0);
    }

    #[test]
    fn sampling_is_seed_deterministic(w in workspace(), seed in any::<u64>(), nonuniform in any::<bool>()) {
        let mode = if nonuniform { ArgumentMode::Nonuniform } else { ArgumentMode::Uniform };
        let model = CommandModel::default().with_mode(mode);
        let draw = |seed| sample_command(&model, &w, None, &mut ChaCha8Rng::seed_from_u64(seed));
        let c = draw(seed);
        prop_assert_eq!(c, draw(seed));
        prop_assert!(w.apply(&c).is_ok());
    }
}
