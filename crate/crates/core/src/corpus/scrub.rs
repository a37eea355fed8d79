use super::WebsiteUniverse;
use crate::trace::Trace;

/// Removes every event whose server name contains a monitored site id as a
/// substring (e.g. `1sn34.ebay.com` for `ebay.com`). Survivors keep their
/// order.
pub fn scrub(trace: &Trace, universe: &WebsiteUniverse) -> Trace {
    Trace {
        label: trace.label.clone(),
        events: trace
            .events
            .iter()
            .filter(|e| !universe.sites().iter().any(|s| e.sni.contains(s.as_str())))
            .cloned()
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{TlsVersion, TraceEvent};
    use proptest::prelude::*;

    fn trace(names: &[&str]) -> Trace {
        Trace {
            label: vec!["ebay.com".into()],
            events: names
                .iter()
                .enumerate()
                .map(|(i, n)| TraceEvent { sni: n.to_string(), ts: i as f64, ver: TlsVersion::Tls12 })
                .collect(),
        }
    }

    #[test]
    fn removes_names_leaking_a_site() {
        let u = WebsiteUniverse::default_sites();
        let t = scrub(&trace(&["1sn34.ebay.com", "gstatic.com", "www.github.com", "cdn.example.net"]), &u);
        assert_eq!(t.names().collect::<Vec<_>>(), ["gstatic.com", "cdn.example.net"]);
        assert_eq!(t.label, ["ebay.com"]);
        assert_eq!(t.events[0].ts, 1.0);
    }

    proptest! {
        #[test]
        fn idempotent_and_order_preserving(names in prop::collection::vec("[a-z]{1,4}(\\.ebay\\.com|\\.net|\\.imdb\\.com)?", 0..30)) {
            let u = WebsiteUniverse::default_sites();
            let refs: Vec<&str> = names.iter().map(String::as_str).collect();
            let t = trace(&refs);
            let once = scrub(&t, &u);
            prop_assert_eq!(&scrub(&once, &u), &once);
            // survivors appear in their original relative order
            let mut it = t.events.iter();
            for e in &once.events {
                prop_assert!(it.any(|o| o == e));
            }
        }
    }
}
