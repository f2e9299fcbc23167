//! A planted-structure SVO generator for end-to-end checks.
//!
//! Three noun classes (dog-like, cat-like, mouse-like) and verb classes tied
//! to them. Transitive chase-like verbs only ever pair a dog-like subject
//! with a cat-like object, or a cat-like subject with a mouse-like object;
//! dogs never chase mice.

use rand::Rng;

use crate::corpus::TripleRecord;
use crate::rng::{stream_rng, Stream};

pub const DOG_LIKE: &[&str] = &["dog", "wolf", "hound"];
pub const CAT_LIKE: &[&str] = &["cat", "lion", "tiger"];
pub const MOUSE_LIKE: &[&str] = &["mouse", "rat", "vole"];
pub const CHASE_LIKE: &[&str] = &["chase", "pursue"];
/// Intransitive verbs per noun class (subject only).
pub const INTRANSITIVE: [&[&str]; 3] = [&["bark", "howl"], &["purr", "meow"], &["squeak", "scurry"]];
/// Object-only verbs per noun class.
pub const OBJECT_ONLY: [&[&str]; 3] = [&["walk", "leash"], &["stroke", "groom"], &["trap", "poison"]];

pub fn noun_classes() -> [&'static [&'static str]; 3] {
    [DOG_LIKE, CAT_LIKE, MOUSE_LIKE]
}

/// Every group of interchangeable predicates.
pub fn predicate_classes() -> Vec<&'static [&'static str]> {
    let mut out: Vec<&'static [&'static str]> = noun_classes().to_vec();
    out.push(CHASE_LIKE);
    out.extend(INTRANSITIVE);
    out.extend(OBJECT_ONLY);
    out
}

/// Verb/argument pairs that co-occur in the generator.
pub fn thematic_pairs() -> Vec<(&'static str, &'static str)> {
    let mut out = Vec::new();
    for (k, nouns) in noun_classes().into_iter().enumerate() {
        for &n in nouns {
            for &v in INTRANSITIVE[k].iter().chain(OBJECT_ONLY[k]) {
                out.push((v, n));
            }
        }
    }
    for &v in CHASE_LIKE {
        for &n in DOG_LIKE.iter().chain(CAT_LIKE).chain(MOUSE_LIKE) {
            out.push((v, n));
        }
    }
    out
}

fn pick<'a, R: Rng>(rng: &mut R, xs: &[&'a str]) -> &'a str {
    xs[rng.random_range(0..xs.len())]
}

/// `n` tokens: 30% chase-like SVO (half dog->cat, half cat->mouse), 35%
/// subject-only, 35% object-only, classes uniform.
pub fn planted_triples(n: usize, seed: u64) -> Vec<TripleRecord> {
    let mut rng = stream_rng(seed, Stream::Synthetic, [0, 0, 0]);
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            if u < 0.3 {
                let (subj, obj) = if rng.random::<bool>() {
                    (DOG_LIKE, CAT_LIKE)
                } else {
                    (CAT_LIKE, MOUSE_LIKE)
                };
                TripleRecord {
                    verb: pick(&mut rng, CHASE_LIKE).into(),
                    arg1: Some(pick(&mut rng, subj).into()),
                    arg2: Some(pick(&mut rng, obj).into()),
                }
            } else {
                let k = rng.random_range(0..3);
                let noun = pick(&mut rng, noun_classes()[k]).to_string();
                if u < 0.65 {
                    TripleRecord {
                        verb: pick(&mut rng, INTRANSITIVE[k]).into(),
                        arg1: Some(noun),
                        arg2: None,
                    }
                } else {
                    TripleRecord {
                        verb: pick(&mut rng, OBJECT_ONLY[k]).into(),
                        arg1: None,
                        arg2: Some(noun),
                    }
                }
            }
        })
        .collect()
}

/// A reduced generator over twelve predicates: two nouns per class, one
/// chase verb, one intransitive verb per class, and object-only verbs for
/// the dog-like and mouse-like classes. Mixture weights match
/// [`planted_triples`].
pub fn small_planted_triples(n: usize, seed: u64) -> Vec<TripleRecord> {
    let nouns = [&DOG_LIKE[..2], &CAT_LIKE[..2], &MOUSE_LIKE[..2]];
    let mut rng = stream_rng(seed, Stream::Synthetic, [1, 0, 0]);
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            if u < 0.3 {
                let k = rng.random_range(0..2);
                TripleRecord {
                    verb: CHASE_LIKE[0].into(),
                    arg1: Some(pick(&mut rng, nouns[k]).into()),
                    arg2: Some(pick(&mut rng, nouns[k + 1]).into()),
                }
            } else if u < 0.65 {
                let k = rng.random_range(0..3);
                TripleRecord {
                    verb: INTRANSITIVE[k][0].into(),
                    arg1: Some(pick(&mut rng, nouns[k]).into()),
                    arg2: None,
                }
            } else {
                let k = [0, 2][rng.random_range(0..2)];
                TripleRecord {
                    verb: OBJECT_ONLY[k][0].into(),
                    arg1: None,
                    arg2: Some(pick(&mut rng, nouns[k]).into()),
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dogs_never_chase_mice() {
        let ts = planted_triples(5000, 3);
        for t in ts.iter().filter(|t| CHASE_LIKE.contains(&t.verb.as_str())) {
            let s = t.arg1.as_deref().unwrap();
            let o = t.arg2.as_deref().unwrap();
            assert!(!(DOG_LIKE.contains(&s) && MOUSE_LIKE.contains(&o)));
        }
        assert_eq!(ts, planted_triples(5000, 3));
    }

    #[test]
    fn small_generator_has_twelve_predicates() {
        let mut names = std::collections::BTreeSet::new();
        for t in small_planted_triples(3000, 1) {
            names.insert(t.verb);
            names.extend(t.arg1);
            names.extend(t.arg2);
        }
        assert_eq!(names.len(), 12);
    }
}
