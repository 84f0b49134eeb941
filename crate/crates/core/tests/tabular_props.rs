use proptest::prelude::*;
use tabkit_core::tabular::{audit, describe, load_csv, read_csv, save_csv, write_csv};
use tabkit_core::{Column, SplitMix64, Table};

fn table() -> impl Strategy<Value = Table> {
    (2usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(prop::option::weighted(0.9, -1e6..1e6f64), n),
            prop::collection::vec(0u8..30, n),
            prop::collection::vec(prop::option::weighted(0.9, 0usize..4), n),
        )
            .prop_map(|(a, b, c)| {
                let levels = ["red", "green", "blue, dark", "say \"hi\""];
                let cat: Vec<Option<&str>> = c.iter().map(|v| v.map(|i| levels[i])).collect();
                let ints: Vec<f64> = b.iter().map(|&v| f64::from(v)).collect();
                Table::new(
                    "t",
                    vec![
                        Column::numeric("a", a),
                        Column::dense("b", &ints),
                        Column::categorical("c", &cat),
                    ],
                )
                .unwrap()
            })
    })
}

fn complete_table() -> impl Strategy<Value = Table> {
    (2usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(-1e6..1e6f64, n),
            prop::collection::vec(0u8..5, n),
            prop::collection::vec(0usize..3, n),
        )
            .prop_map(|(a, b, c)| {
                let levels = ["x", "y, z", "w"];
                let cat: Vec<Option<&str>> = c.iter().map(|&i| Some(levels[i])).collect();
                let ints: Vec<f64> = b.iter().map(|&v| f64::from(v)).collect();
                Table::new(
                    "t",
                    vec![Column::dense("a", &a), Column::dense("b", &ints), Column::categorical("c", &cat)],
                )
                .unwrap()
            })
    })
}

proptest! {
    #[test]
    fn describe_ignores_row_order(t in table(), seed in any::<u64>()) {
        let mut order: Vec<usize> = (0..t.n_rows()).collect();
        SplitMix64::new(seed).shuffle(&mut order);
        let shuffled = t.select_rows(&order);
        let a = describe(&t).unwrap();
        let b = describe(&shuffled).unwrap();
        prop_assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    // With interpolated quartiles the closed interval [q1, q3] always holds
    // at least (n - 2) / 2 values, and at least half when n = 1 mod 4,
    // where both quartiles land on order statistics.
    #[test]
    fn quartiles_bracket_half_the_values(t in table()) {
        for s in describe(&t).unwrap() {
            let values: Vec<f64> = t.column(&s.column).unwrap().as_numeric().unwrap().iter().flatten().copied().collect();
            if values.is_empty() {
                continue;
            }
            let inside = values.iter().filter(|&&v| v >= s.q1 && v <= s.q3).count();
            let n = values.len();
            let needed = if n % 4 == 1 { n } else { n.saturating_sub(2) };
            prop_assert!(2 * inside >= needed, "{inside} of {n} in [{}, {}]", s.q1, s.q3);
        }
    }

    #[test]
    fn csv_round_trip_keeps_audit(t in complete_table()) {
        let mut buf = Vec::new();
        write_csv(&t, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), "t", None).unwrap();
        prop_assert_eq!(audit(&back), audit(&t));
        prop_assert_eq!(back.n_rows(), t.n_rows());
        prop_assert_eq!(describe(&back).unwrap(), describe(&t).unwrap());
    }
}

#[test]
fn csv_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("people.csv");
    let t = Table::new(
        "people",
        vec![
            Column::numeric("age", vec![Some(31.0), None, Some(44.5), Some(31.0)]),
            Column::categorical("city", &[Some("Oslo"), Some("Lima, PE"), None, Some("Oslo")]),
        ],
    )
    .unwrap();
    save_csv(&t, &path).unwrap();
    let back = load_csv(&path, None).unwrap();
    assert_eq!(back.column_names(), vec!["age", "city"]);
    assert_eq!(audit(&back), audit(&t));
    assert_eq!(describe(&back).unwrap(), describe(&t).unwrap());
    for row in 0..t.n_rows() {
        for c in t.columns() {
            assert_eq!(back.column(&c.name).unwrap().cell_text(row), c.cell_text(row));
        }
    }
}

#[test]
fn quartiles_of_small_samples() {
    let s = describe(&Table::new("t", vec![Column::dense("v", &[0.0, 1.0])]).unwrap()).unwrap();
    assert_eq!((s[0].q1, s[0].q3), (0.25, 0.75));
    let five = [3.0, 1.0, 4.0, 1.0, 5.0];
    let s = describe(&Table::new("t", vec![Column::dense("v", &five)]).unwrap()).unwrap();
    assert_eq!((s[0].q1, s[0].median, s[0].q3), (1.0, 3.0, 4.0));
}
