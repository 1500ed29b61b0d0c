use super::*;
use proptest::prelude::*;

fn pair_poset() -> Poset {
    Poset::product(vec![Poset::num("a", "u"), Poset::num("b", "u")])
}

fn pt(a: f64, b: f64) -> Value {
    Value::Tuple(vec![Value::num(a), Value::num(b)])
}

fn plain(values: Vec<Value>) -> Vec<(Value, Vec<Implementation>)> {
    values.into_iter().map(|v| (v, vec![vec![]])).collect()
}

fn computers() -> CatalogMdpi {
    let opt = |id: &str, gflops: f64, price: f64| CatalogOption {
        provides: Value::num(gflops),
        requires: Value::num(price),
        label: vec![("computer".into(), id.into())],
    };
    CatalogMdpi::new(
        "computer",
        Poset::num("compute", "GFLOPS"),
        Poset::num("price", "CHF"),
        vec![opt("A", 1.0, 100.0), opt("B", 2.0, 300.0)],
    )
    .unwrap()
}

fn ceiling_table() -> CatalogMdpi {
    let opts = [(1.0, 10.0), (2.0, 20.0), (3.0, 30.0)]
        .iter()
        .map(|&(k, v)| CatalogOption {
            provides: Value::num(k),
            requires: Value::num(v),
            label: vec![("table".into(), format!("{k}"))],
        })
        .collect();
    CatalogMdpi::new("table", Poset::num("x", "u"), Poset::num("y", "u"), opts).unwrap()
}

fn constant(v: f64) -> DynMdpi {
    Arc::new(MapMdpi::new(
        "const",
        Poset::num("x", "u"),
        Poset::num("x", "u"),
        move |_| Ok(Some(Value::num(v))),
    ))
}

#[test]
fn merge_examples() {
    let p = pair_poset();
    let a = antichain_merge(&p, plain(vec![pt(1.0, 2.0), pt(2.0, 1.0), pt(2.0, 2.0)])).unwrap();
    assert_eq!(a.value_set(), [pt(1.0, 2.0), pt(2.0, 1.0)].into());
    let again = antichain_merge(
        &p,
        a.points
            .iter()
            .map(|x| (x.value.clone(), x.impls.clone()))
            .collect(),
    )
    .unwrap();
    assert_eq!(again, a);
    let single = antichain_merge(&p, plain(vec![pt(3.0, 3.0)])).unwrap();
    assert_eq!(single.values(), vec![&pt(3.0, 3.0)]);
    let n = Poset::num("x", "u");
    let chain = antichain_merge(
        &n,
        plain(vec![Value::num(3.0), Value::num(1.0), Value::num(2.0)]),
    )
    .unwrap();
    assert_eq!(chain.values(), vec![&Value::num(1.0)]);
    assert!(matches!(
        antichain_merge(&n, plain(vec![Value::token("x")])),
        Err(Error::PosetMismatch(_))
    ));
}

#[test]
fn identical_points_pool_implementations() {
    let n = Poset::num("x", "u");
    let a = antichain_merge(
        &n,
        vec![
            (Value::num(1.0), vec![vec![("k".into(), "a".into())]]),
            (Value::num(1.0), vec![vec![("k".into(), "b".into())]]),
        ],
    )
    .unwrap();
    assert_eq!(a.len(), 1);
    assert_eq!(a.points[0].impls.len(), 2);
}

#[test]
fn opposite_and_token_orders() {
    let op = Poset::opposite("turn_radius", "m");
    assert!(op.leq(&Value::num(5.0), &Value::num(3.0)));
    assert_eq!(op.bottom(), Value::inf());
    assert_eq!(
        op.join(&Value::num(5.0), &Value::num(3.0)),
        Some(Value::num(3.0))
    );
    let t = Poset::tokens_ordered(
        "shape",
        [
            ("s".to_string(), "m".to_string()),
            ("m".to_string(), "l".to_string()),
        ],
    );
    assert!(t.leq(&Value::token("s"), &Value::token("l")));
    assert!(t.leq(&Value::Bot, &Value::token("s")));
    assert!(!t.leq(&Value::token("l"), &Value::token("s")));
    assert_eq!(
        t.join(&Value::token("s"), &Value::token("m")),
        Some(Value::token("m"))
    );
    let d = Poset::tokens("d");
    assert_eq!(d.join(&Value::token("x"), &Value::token("y")), None);
    let s = Poset::sets("task");
    assert!(s.leq(&Value::set(["a"]), &Value::set(["a", "b"])));
    assert_eq!(
        s.join(&Value::set(["a"]), &Value::set(["b"])),
        Some(Value::set(["a", "b"]))
    );
}

#[test]
fn series_examples() {
    let table: DynMdpi = Arc::new(ceiling_table());
    let s = compose_series(constant(2.0), table.clone()).unwrap();
    assert_eq!(
        s.h(&Value::num(0.0)).unwrap().values(),
        vec![&Value::num(20.0)]
    );
    let s = compose_series(constant(2.5), table.clone()).unwrap();
    assert_eq!(
        s.h(&Value::num(0.0)).unwrap().values(),
        vec![&Value::num(30.0)]
    );
    let id: DynMdpi = Arc::new(IdentityMdpi {
        poset: Poset::num("y", "u"),
    });
    let with_id = compose_series(table.clone(), id).unwrap();
    for x in [0.0, 1.0, 1.5, 3.0, 4.0] {
        assert_eq!(
            with_id.h(&Value::num(x)).unwrap().value_set(),
            table.h(&Value::num(x)).unwrap().value_set()
        );
    }
    let never: DynMdpi = Arc::new(MapMdpi::new(
        "never",
        Poset::num("x", "u"),
        Poset::num("x", "u"),
        |_| Ok(None),
    ));
    let s = compose_series(never, table.clone()).unwrap();
    assert!(s.h(&Value::num(1.0)).unwrap().is_empty());
    let c: DynMdpi = Arc::new(computers());
    assert!(matches!(
        compose_series(table, c),
        Err(Error::PosetMismatch(_))
    ));
}

#[test]
fn series_concatenates_implementations() {
    let narrow = CatalogMdpi::new(
        "t2",
        Poset::num("y", "u"),
        Poset::num("z", "u"),
        vec![CatalogOption {
            provides: Value::num(10.0),
            requires: Value::num(7.0),
            label: vec![("t2".into(), "only".into())],
        }],
    )
    .unwrap();
    let s = compose_series(Arc::new(ceiling_table()), Arc::new(narrow)).unwrap();
    let a = s.h(&Value::num(0.5)).unwrap();
    assert_eq!(a.values(), vec![&Value::num(7.0)]);
    assert!(s.h(&Value::num(1.5)).unwrap().is_empty());
    assert_eq!(
        a.points[0].impls,
        vec![vec![
            ("table".to_string(), "1".to_string()),
            ("t2".to_string(), "only".to_string())
        ]]
    );
}

#[test]
fn parallel_examples() {
    let n = Poset::num("x", "u");
    let id: DynMdpi = Arc::new(IdentityMdpi { poset: n.clone() });
    let par = compose_parallel(id.clone(), id.clone());
    let f = pt(1.0, 2.0);
    assert_eq!(par.h(&f).unwrap().values(), vec![&f]);
    let never: DynMdpi = Arc::new(MapMdpi::new("never", n.clone(), n.clone(), |_| Ok(None)));
    assert!(compose_parallel(never, id.clone())
        .h(&f)
        .unwrap()
        .is_empty());
    let two = CatalogMdpi::new(
        "two",
        n.clone(),
        pair_poset(),
        vec![
            CatalogOption {
                provides: Value::num(5.0),
                requires: pt(1.0, 2.0),
                label: vec![],
            },
            CatalogOption {
                provides: Value::num(5.0),
                requires: pt(2.0, 1.0),
                label: vec![],
            },
        ],
    )
    .unwrap();
    let par = compose_parallel(Arc::new(two), id);
    let out = par.h(&pt(1.0, 4.0)).unwrap();
    assert_eq!(
        out.value_set(),
        [
            Value::Tuple(vec![pt(1.0, 2.0), Value::num(4.0)]),
            Value::Tuple(vec![pt(2.0, 1.0), Value::num(4.0)])
        ]
        .into()
    );
}

#[test]
fn two_computer_catalog() {
    let d =
        single_node_diagram("computer", Arc::new(computers()), &["compute"], &["price"]).unwrap();
    let ask = |g: f64| {
        solve_fix_fun_min_res(&d, &Value::Tuple(vec![Value::num(g)]))
            .unwrap()
            .antichain
    };
    let a = ask(1.0);
    assert_eq!(a.values(), vec![&Value::Tuple(vec![Value::num(100.0)])]);
    assert_eq!(
        a.points[0].impls,
        vec![vec![("computer".to_string(), "A".to_string())]]
    );
    let b = ask(1.5);
    assert_eq!(
        b.points[0].impls,
        vec![vec![("computer".to_string(), "B".to_string())]]
    );
    assert!(ask(2.5).is_empty());
    assert_eq!(
        ask(0.0).values(),
        vec![&Value::Tuple(vec![Value::num(100.0)])]
    );

    let c = computers();
    let budget = solve_fix_res_max_fun(&c, &Value::num(150.0)).unwrap();
    assert_eq!(budget.values(), vec![&Value::num(1.0)]);
    assert!(solve_fix_res_max_fun(&c, &Value::num(0.0))
        .unwrap()
        .is_empty());
    assert_eq!(
        solve_fix_res_max_fun(&c, &Value::inf()).unwrap().values(),
        vec![&Value::num(2.0)]
    );
}

#[test]
fn bottom_demand_gives_per_coordinate_minima() {
    let opts = [(1.0, 2.0), (2.0, 1.0), (3.0, 3.0)]
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| CatalogOption {
            provides: Value::num(1.0 + i as f64),
            requires: pt(a, b),
            label: vec![("item".into(), i.to_string())],
        })
        .collect();
    let cat = CatalogMdpi::new("cat", Poset::num("f", "u"), pair_poset(), opts).unwrap();
    let a = cat.h(&Value::num(0.0)).unwrap();
    assert_eq!(a.value_set(), [pt(1.0, 2.0), pt(2.0, 1.0)].into());
    assert!(a.is_antichain(&pair_poset()));
}

#[test]
fn series_dual_query() {
    let table = ceiling_table();
    let c = compose_series(
        Arc::new(table),
        Arc::new(IdentityMdpi {
            poset: Poset::num("y", "u"),
        }),
    )
    .unwrap();
    assert_eq!(
        solve_fix_res_max_fun(c.as_ref(), &Value::num(25.0))
            .unwrap()
            .values(),
        vec![&Value::num(2.0)]
    );
    let m = MapMdpi::sum("sum", vec![Poset::num("x", "u"); 2], Poset::num("x", "u"));
    assert!(m.h_dual(&Value::num(1.0)).is_err());
}

/// Tokens a, b compete for a loop wire: block X provides shape and requires
/// the shape token of its option; Y (the body) provides the token it builds.
fn looped_diagram() -> Diagram {
    let shape = Poset::tokens("shape");
    let cost = Poset::num("cost", "CHF");
    let opt = |f: Value, r: Value, l: &str| CatalogOption {
        provides: f,
        requires: r,
        label: vec![("x".into(), l.into())],
    };
    let x = CatalogMdpi::new(
        "x",
        Poset::product(vec![Poset::num("speed", "km/h"), shape.clone()]),
        Poset::product(vec![cost.clone(), shape.clone()]),
        vec![
            opt(
                Value::Tuple(vec![Value::num(10.0), Value::token("a")]),
                Value::Tuple(vec![Value::num(5.0), Value::token("a")]),
                "a",
            ),
            opt(
                Value::Tuple(vec![Value::num(20.0), Value::token("b")]),
                Value::Tuple(vec![Value::num(8.0), Value::token("b")]),
                "b",
            ),
        ],
    )
    .unwrap();
    let y = CatalogMdpi::new(
        "y",
        shape.clone(),
        Poset::product(vec![shape.clone(), cost.clone()]),
        vec![
            CatalogOption {
                provides: Value::token("a"),
                requires: Value::Tuple(vec![Value::token("a"), Value::num(1.0)]),
                label: vec![("body".into(), "a".into())],
            },
            CatalogOption {
                provides: Value::token("b"),
                requires: Value::Tuple(vec![Value::token("b"), Value::num(3.0)]),
                label: vec![("body".into(), "b".into())],
            },
        ],
    )
    .unwrap();
    let sum = MapMdpi::sum("sum", vec![cost.clone(), cost.clone()], cost.clone());
    let node = |name: &str, m: DynMdpi, f: &[&str], r: &[&str]| Node {
        name: name.into(),
        mdpi: m,
        fun_ports: f.iter().map(|s| s.to_string()).collect(),
        res_ports: r.iter().map(|s| s.to_string()).collect(),
    };
    let e = |a: &str, b: &str, c: &str, d: &str, l: bool| Edge {
        from: PortRef::new(a, b),
        to: PortRef::new(c, d),
        is_loop: l,
    };
    Diagram::new(
        "toy",
        vec![
            node("x", Arc::new(x), &["speed", "shape"], &["cost", "shape"]),
            node("y", Arc::new(y), &["shape"], &["shape", "cost"]),
            node("sum", Arc::new(sum), &["a", "b"], &["total"]),
        ],
        vec![
            e("x", "shape", "y", "shape", false),
            e("x", "cost", "sum", "a", false),
            e("y", "cost", "sum", "b", false),
            e("y", "shape", "x", "shape", true),
        ],
        vec![PortRef::new("x", "speed")],
        vec![PortRef::new("sum", "total")],
    )
    .unwrap()
}

#[test]
fn loop_diagram_matches_enumeration() {
    let d = looped_diagram();
    let ask = |s: f64| solve_fix_fun_min_res(&d, &Value::Tuple(vec![Value::num(s)])).unwrap();
    let low = ask(5.0);
    assert_eq!(
        low.antichain.values(),
        vec![&Value::Tuple(vec![Value::num(6.0)])]
    );
    assert!(low.kleene_iterations >= 2 && low.kleene_iterations <= 50);
    let imp = &low.antichain.points[0].impls[0];
    assert!(
        imp.contains(&("x".to_string(), "a".to_string()))
            && imp.contains(&("body".to_string(), "a".to_string()))
    );
    assert_eq!(
        ask(15.0).antichain.values(),
        vec![&Value::Tuple(vec![Value::num(11.0)])]
    );
    assert!(ask(25.0).antichain.is_empty());
}

#[test]
fn loop_combinator_agrees_with_diagram_loop() {
    // the same feedback written with the algebraic loop operator
    let shape = Poset::tokens("shape");
    let cost = Poset::num("cost", "CHF");
    let mk = |sp: f64, c: f64, t: &str| CatalogOption {
        provides: Value::Tuple(vec![Value::num(sp), Value::token(t)]),
        requires: Value::Tuple(vec![Value::num(c), Value::token(t)]),
        label: vec![("x".into(), t.into())],
    };
    let inner = CatalogMdpi::new(
        "x",
        Poset::product(vec![Poset::num("speed", "km/h"), shape.clone()]),
        Poset::product(vec![cost, shape]),
        vec![mk(10.0, 6.0, "a"), mk(20.0, 11.0, "b")],
    )
    .unwrap();
    let l = compose_loop("shape", Arc::new(inner), 100).unwrap();
    assert_eq!(
        l.h(&Value::num(5.0)).unwrap().values(),
        vec![&Value::num(6.0)]
    );
    assert_eq!(
        l.h(&Value::num(15.0)).unwrap().values(),
        vec![&Value::num(11.0)]
    );
    assert!(l.last_iterations() >= 2);
}

#[test]
fn divergence_is_reported() {
    // an ever-growing loop wire
    let n = Poset::num("x", "u");
    let inner = MapMdpi::new(
        "grow",
        Poset::product(vec![n.clone(), n.clone()]),
        Poset::product(vec![n.clone(), n.clone()]),
        |f| {
            let t = f.tuple().unwrap();
            let Value::Num(x) = t[1] else { unreachable!() };
            Ok(Some(Value::Tuple(vec![Value::num(0.0), Value::Num(x + 1)])))
        },
    );
    let l = compose_loop("grow", Arc::new(inner), 25).unwrap();
    match l.h(&Value::num(0.0)) {
        Err(Error::Divergence { name, iterations }) => {
            assert_eq!(name, "grow");
            assert_eq!(iterations, 25);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn diagram_validation() {
    let c: DynMdpi = Arc::new(computers());
    let node = Node {
        name: "c".into(),
        mdpi: c.clone(),
        fun_ports: vec!["compute".into()],
        res_ports: vec!["price".into()],
    };
    let r = Diagram::new(
        "bad",
        vec![node],
        vec![],
        vec![PortRef::new("c", "nope")],
        vec![PortRef::new("c", "price")],
    );
    assert!(matches!(r, Err(Error::UnresolvedReferences(_))));
    let node = Node {
        name: "c".into(),
        mdpi: c,
        fun_ports: vec!["compute".into()],
        res_ports: vec!["price".into()],
    };
    let r = Diagram::new(
        "dangling",
        vec![node],
        vec![],
        vec![PortRef::new("c", "compute")],
        vec![],
    );
    assert!(matches!(r, Err(Error::Invalid(_))));
}

#[test]
fn on_demand_is_memoized() {
    let n = Poset::num("x", "u");
    let od = OnDemandMdpi::new("od", n.clone(), n.clone(), |f| {
        Ok(Antichain {
            points: vec![AntichainPoint {
                value: f.clone(),
                impls: vec![vec![]],
            }],
        })
    });
    for _ in 0..3 {
        od.h(&Value::num(2.0)).unwrap();
    }
    od.h(&Value::num(3.0)).unwrap();
    assert_eq!(od.evaluations(), 2);
}

fn arb_pair() -> impl Strategy<Value = (u8, u8)> {
    (0u8..6, 0u8..6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn poset_axioms_hold(xs in proptest::collection::vec(arb_pair(), 3), sets in proptest::collection::vec(proptest::collection::btree_set("[a-d]", 0..4), 3)) {
        let p = pair_poset();
        let v: Vec<Value> = xs.iter().map(|&(a, b)| pt(a as f64, b as f64)).collect();
        let s = Poset::sets("s");
        let w: Vec<Value> = sets.iter().map(|x| Value::Set(x.clone())).collect();
        for (poset, vals) in [(&p, &v), (&s, &w)] {
            for a in vals.iter() {
                prop_assert!(poset.leq(a, a));
                prop_assert!(poset.leq(&poset.bottom(), a));
                for b in vals.iter() {
                    if poset.leq(a, b) && poset.leq(b, a) { prop_assert_eq!(a, b); }
                    let j = poset.join(a, b).unwrap();
                    prop_assert!(poset.leq(a, &j) && poset.leq(b, &j));
                    for c in vals.iter() {
                        if poset.leq(a, b) && poset.leq(b, c) { prop_assert!(poset.leq(a, c)); }
                    }
                }
            }
        }
    }

    #[test]
    fn merge_is_idempotent_and_minimal(xs in proptest::collection::vec(arb_pair(), 0..20)) {
        let p = pair_poset();
        let vals: Vec<Value> = xs.iter().map(|&(a, b)| pt(a as f64, b as f64)).collect();
        let a = antichain_merge(&p, plain(vals.clone())).unwrap();
        prop_assert!(a.is_antichain(&p));
        for v in &vals {
            prop_assert!(a.points.iter().any(|q| p.leq(&q.value, v)));
        }
        let again = antichain_merge(&p, a.points.iter().map(|x| (x.value.clone(), x.impls.clone())).collect()).unwrap();
        prop_assert_eq!(again, a);
    }

    #[test]
    fn composed_maps_are_monotone(opts in proptest::collection::vec((0u8..10, 0u8..10, 0u8..10), 1..8), lo in 0u8..12, d in 0u8..5) {
        let cat = CatalogMdpi::new(
            "c",
            Poset::num("f", "u"),
            pair_poset(),
            opts.iter().map(|&(f, a, b)| CatalogOption { provides: Value::num(f as f64), requires: pt(a as f64, b as f64), label: vec![] }).collect(),
        ).unwrap();
        let cat: DynMdpi = Arc::new(cat);
        let sum: DynMdpi = Arc::new(MapMdpi::sum("s", vec![Poset::num("a", "u"), Poset::num("b", "u")], Poset::num("t", "u")));
        let series = compose_series(cat.clone(), sum).unwrap();
        let small = Value::num(lo as f64);
        let big = Value::num((lo + d) as f64);
        prop_assert!(h_monotone_on(cat.as_ref(), &small, &big).unwrap());
        prop_assert!(h_monotone_on(series.as_ref(), &small, &big).unwrap());
        let par = compose_parallel(cat.clone(), cat.clone());
        let fs = Value::Tuple(vec![small.clone(), small.clone()]);
        let fb = Value::Tuple(vec![big.clone(), small]);
        prop_assert!(h_monotone_on(par.as_ref(), &fs, &fb).unwrap());
    }
}
