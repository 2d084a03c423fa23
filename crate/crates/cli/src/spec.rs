//! Parsers for the compact `kind:arg:arg` option values.

use quantcons::{GraphSource, ValueSource};

/// `ring-directed:N`, `ring-undirected:N` or `random:N:P[:SEED]`.
///
/// Returns the source and the fixed seed of a random graph, if given.
pub fn parse_graph(spec: &str) -> Result<(GraphSource, Option<u64>), String> {
    let parts: Vec<&str> = spec.split(':').collect();
    let count = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| format!("bad node count {s:?} in {spec:?}"))
    };
    match parts.as_slice() {
        ["ring-directed", n] => Ok((GraphSource::RingDirected(count(n)?), None)),
        ["ring-undirected", n] => Ok((GraphSource::RingUndirected(count(n)?), None)),
        ["random", n, p, rest @ ..] if rest.len() <= 1 => {
            let extra_edge_prob = p
                .parse::<f64>()
                .map_err(|_| format!("bad edge probability {p:?} in {spec:?}"))?;
            let seed = rest
                .first()
                .map(|s| s.parse::<u64>().map_err(|_| format!("bad seed {s:?} in {spec:?}")))
                .transpose()?;
            Ok((GraphSource::Random { n: count(n)?, extra_edge_prob }, seed))
        }
        _ => Err(format!(
            "unknown graph {spec:?}; expected ring-directed:N, ring-undirected:N or random:N:P[:SEED]"
        )),
    }
}

/// `uniform:LO:HI[:SEED]`, `total:SUM:DEV[:SEED]`, or a comma-separated list.
pub fn parse_values(spec: &str) -> Result<ValueSource, String> {
    let int = |s: &str| {
        s.parse::<i64>()
            .map_err(|_| format!("bad integer {s:?} in {spec:?}"))
    };
    let seed = |rest: &[&str]| {
        rest.first()
            .map(|s| {
                s.parse::<u64>()
                    .map_err(|_| format!("bad seed {s:?} in {spec:?}"))
            })
            .transpose()
    };
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        ["uniform", lo, hi, rest @ ..] if rest.len() <= 1 => Ok(ValueSource::Uniform {
            lo: int(lo)?,
            hi: int(hi)?,
            seed: seed(rest)?,
        }),
        ["total", total, deviation, rest @ ..] if rest.len() <= 1 => Ok(ValueSource::Total {
            total: int(total)?,
            deviation: int(deviation)?,
            seed: seed(rest)?,
        }),
        [list] => Ok(ValueSource::Explicit(
            list.split(',')
                .map(|v| int(v.trim()))
                .collect::<Result<_, _>>()?,
        )),
        _ => Err(format!(
            "unknown values {spec:?}; expected a list, uniform:LO:HI[:SEED] or total:SUM:DEV[:SEED]"
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_specs() {
        assert_eq!(
            parse_graph("ring-directed:4").unwrap(),
            (GraphSource::RingDirected(4), None)
        );
        assert_eq!(
            parse_graph("ring-undirected:20").unwrap(),
            (GraphSource::RingUndirected(20), None)
        );
        assert_eq!(
            parse_graph("random:20:0.1:7").unwrap(),
            (
                GraphSource::Random {
                    n: 20,
                    extra_edge_prob: 0.1
                },
                Some(7)
            )
        );
        assert_eq!(parse_graph("random:5:0.5").unwrap().1, None);
        assert!(parse_graph("ring:4").is_err());
        assert!(parse_graph("random:5").is_err());
        assert!(parse_graph("ring-directed:x").is_err());
    }

    #[test]
    fn value_specs() {
        assert_eq!(
            parse_values("9,3,9,3").unwrap(),
            ValueSource::Explicit(vec![9, 3, 9, 3])
        );
        assert_eq!(
            parse_values("-5, 2").unwrap(),
            ValueSource::Explicit(vec![-5, 2])
        );
        assert_eq!(
            parse_values("uniform:-50:50:3").unwrap(),
            ValueSource::Uniform {
                lo: -50,
                hi: 50,
                seed: Some(3)
            }
        );
        assert_eq!(
            parse_values("total:500:25").unwrap(),
            ValueSource::Total {
                total: 500,
                deviation: 25,
                seed: None
            }
        );
        assert!(parse_values("1,x").is_err());
        assert!(parse_values("gauss:0:1").is_err());
    }
}
