use proptest::prelude::*;
use snel::storage::{
    load_table, read_fixed_column, read_text_column, write_fixed_column, write_table,
    write_text_column, ColumnDescriptor, Index, RangeOp, SchemaDescriptor, TEXT_SYNC_MARKER,
};
use snel::{ColumnType, Value};

fn fixed_values() -> impl Strategy<Value = (ColumnType, Vec<Value>)> {
    prop_oneof![
        prop::collection::vec(prop::option::of(any::<bool>()), 0..40).prop_map(|v| (
            ColumnType::Bool,
            v.into_iter()
                .map(|x| x.map_or(Value::Null, Value::Bool))
                .collect()
        )),
        prop::collection::vec(prop::option::of(any::<i8>()), 0..40).prop_map(|v| (
            ColumnType::Int8,
            v.into_iter()
                .map(|x| x.map_or(Value::Null, Value::Int8))
                .collect()
        )),
        prop::collection::vec(prop::option::of(any::<i16>()), 0..40).prop_map(|v| (
            ColumnType::Int16,
            v.into_iter()
                .map(|x| x.map_or(Value::Null, Value::Int16))
                .collect()
        )),
        prop::collection::vec(prop::option::of(any::<i32>()), 0..40).prop_map(|v| (
            ColumnType::Int32,
            v.into_iter()
                .map(|x| x.map_or(Value::Null, Value::Int32))
                .collect()
        )),
        prop::collection::vec(prop::option::of(any::<i64>()), 0..40).prop_map(|v| (
            ColumnType::Int64,
            v.into_iter()
                .map(|x| x.map_or(Value::Null, Value::Int64))
                .collect()
        )),
        prop::collection::vec(
            prop::option::of(prop::num::f32::NORMAL | prop::num::f32::ZERO),
            0..40
        )
        .prop_map(|v| (
            ColumnType::Float32,
            v.into_iter()
                .map(|x| x.map_or(Value::Null, Value::Float32))
                .collect()
        )),
    ]
}

proptest! {
    #[test]
    fn fixed_round_trip((ty, values) in fixed_values()) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t-c.snelcol");
        write_fixed_column(&p, ty, true, &values).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        prop_assert_eq!(bytes.len(), values.len() * ty.fixed_width().unwrap());
        let col = snel::storage::Column::open(
            &p,
            &ColumnDescriptor::new("c", ty).nullable(),
            values.len() as u64,
        ).unwrap();
        for (i, v) in values.iter().enumerate() {
            let back = col.value(snel::storage::RowId(i as u64)).unwrap();
            match (v, &back) {
                (Value::Float32(a), Value::Float32(b)) => prop_assert_eq!(a.to_bits(), b.to_bits()),
                _ => prop_assert_eq!(v, &back),
            }
        }
        let (_, bm) = read_fixed_column(&p, ty, values.len() as u64, true).unwrap();
        prop_assert_eq!(bm.unwrap().as_bytes().len(), values.len().div_ceil(8));
    }

    #[test]
    fn text_round_trip(strings in prop::collection::vec(prop::option::of("[^\u{0}]{0,12}"), 0..30)) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t-s.snelcol");
        write_text_column(&p, &strings).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        let region: usize = strings.iter().flatten().map(|s| s.len() + 1).sum();
        let trailer = i64::from_le_bytes(bytes[bytes.len() - 8..].try_into().unwrap());
        prop_assert_eq!(trailer as usize, region + 2);
        prop_assert_eq!(&bytes[region..region + 2], &TEXT_SYNC_MARKER[..]);
        let t = read_text_column(&p, strings.len() as u64).unwrap();
        for (i, s) in strings.iter().enumerate() {
            prop_assert_eq!(t.get(i), s.as_deref());
        }
    }
}

fn linear(values: &[Value], op: RangeOp, k: &Value) -> Vec<u64> {
    let mut hits: Vec<(Value, u64)> = values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| {
            let ord = match (v, k) {
                (Value::Null, _) => return None,
                (Value::Str(a), Value::Str(b)) => a.as_str().cmp(b.as_str()),
                _ => v
                    .as_f64()
                    .unwrap()
                    .partial_cmp(&k.as_f64().unwrap())
                    .unwrap(),
            };
            op.accepts(ord).then(|| (v.clone(), i as u64))
        })
        .collect();
    hits.sort_by(|a, b| match (&a.0, &b.0) {
        (Value::Str(x), Value::Str(y)) => x.cmp(y).then(a.1.cmp(&b.1)),
        _ => {
            a.0.as_f64()
                .unwrap()
                .total_cmp(&b.0.as_f64().unwrap())
                .then(a.1.cmp(&b.1))
        }
    });
    hits.into_iter().map(|h| h.1).collect()
}

const OPS: [RangeOp; 5] = [
    RangeOp::Lt,
    RangeOp::Le,
    RangeOp::Gt,
    RangeOp::Ge,
    RangeOp::Eq,
];

#[test]
fn index_completeness() {
    use rand::{rngs::StdRng, Rng, SeedableRng};
    let mut rng = StdRng::seed_from_u64(7);
    let dir = tempfile::tempdir().unwrap();
    for (round, ty) in [
        ColumnType::Int32,
        ColumnType::Float32,
        ColumnType::String,
        ColumnType::Int8,
    ]
    .into_iter()
    .enumerate()
    {
        let n = rng.gen_range(0..10_000);
        let gen = |rng: &mut StdRng| -> Value {
            match ty {
                ColumnType::Int32 => Value::Int32(rng.gen_range(-500..500)),
                ColumnType::Int8 => Value::Int8(rng.gen()),
                ColumnType::Float32 => Value::Float32(rng.gen_range(-400..400) as f32 / 4.0),
                _ => Value::Str(format!("s{}", rng.gen_range(0..800))),
            }
        };
        let values: Vec<Value> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.1) {
                    Value::Null
                } else {
                    gen(&mut rng)
                }
            })
            .collect();
        let name = format!("t{round}");
        let schema = SchemaDescriptor::new(
            &name,
            vec![ColumnDescriptor::new("c", ty).nullable().indexed()],
        );
        write_table(dir.path(), &schema, std::slice::from_ref(&values)).unwrap();
        let table = load_table(&dir.path().join(format!("{name}.snel"))).unwrap();
        let idx: &Index = table.index("c").unwrap();
        let entry = std::fs::metadata(dir.path().join(format!("{name}-c.snelidx")))
            .unwrap()
            .len();
        assert_eq!(entry as usize, idx.len() * Index::entry_size(ty));
        for _ in 0..100 {
            let k = gen(&mut rng);
            for op in OPS {
                let got: Vec<u64> = snel::storage::index_range_lookup(&table, "c", op, &k)
                    .unwrap()
                    .map(|r| r.0)
                    .collect();
                assert_eq!(got, linear(&values, op, &k), "{ty} {op} {k}");
            }
        }
    }
}
