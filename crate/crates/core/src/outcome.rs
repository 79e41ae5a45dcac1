//! Who ends up sharing a key with whom, as a function of base picks.
//!
//! Because every circulating value lands one position left of its owner,
//! party i's final key is built on the base picked by party (i+1) mod N.
//! Key equality is therefore decided entirely by the left-rotation of the
//! choice vector, which makes exhaustive analysis cheap: this module never
//! touches group arithmetic, and a cross-check against real ceremonies is
//! what ties it back to [`crate::protocol`].

use num_bigint::BigInt;
use num_rational::BigRational;
use thiserror::Error;

/// Assignments enumerated before [`enumerate_assignments`] refuses to run.
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OutcomeError {
    #[error("{assignments} assignments exceed the enumeration budget of {budget}")]
    BudgetExceeded { assignments: u128, budget: u64 },
}

/// The sharing structure induced by one vector of base choices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SharingPattern {
    /// Base pick that actually forms party i's key: the pick of (i+1) mod N.
    pub effective_bases: Vec<usize>,
    /// Partition of positions into key-equality classes, ordered by smallest
    /// member.
    pub classes: Vec<Vec<usize>>,
    /// For each party 1..N-1, whether it holds the same key as party 0.
    pub shares_with_first: Vec<bool>,
}

impl SharingPattern {
    /// The 1/0 sequence over parties 1..N-1, e.g. "101".
    pub fn bitstring(&self) -> String {
        self.shares_with_first
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect()
    }

    /// Positions (excluding 0) sharing party 0's key.
    pub fn sharers_with_first(&self) -> Vec<usize> {
        self.shares_with_first
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i + 1))
            .collect()
    }

    pub fn num_parties(&self) -> usize {
        self.effective_bases.len()
    }
}

/// The choice vector rotated left by one: entry i is the pick of party
/// (i+1) mod N, the base party i's final key is actually built on.
pub fn effective_bases(choices: &[usize]) -> Vec<usize> {
    let n = choices.len();
    (0..n).map(|i| choices[(i + 1) % n]).collect()
}

pub fn sharing_pattern(choices: &[usize]) -> SharingPattern {
    let effective = effective_bases(choices);
    let mut classes: Vec<(usize, Vec<usize>)> = Vec::new();
    for (i, &base) in effective.iter().enumerate() {
        match classes.iter_mut().find(|(b, _)| *b == base) {
            Some((_, members)) => members.push(i),
            None => classes.push((base, vec![i])),
        }
    }
    let mut classes: Vec<Vec<usize>> = classes.into_iter().map(|(_, m)| m).collect();
    classes.sort_by_key(|c| c[0]);
    let first = effective.first().copied();
    let shares_with_first = effective
        .iter()
        .skip(1)
        .map(|&b| Some(b) == first)
        .collect();
    SharingPattern {
        effective_bases: effective,
        classes,
        shares_with_first,
    }
}

/// One enumerated assignment and its sharing structure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentRow {
    pub choices: Vec<usize>,
    pub pattern: SharingPattern,
}

/// The four qualitatively distinct ways four parties can split two bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseClass {
    AllSame,
    ThreeOne,
    AdjacentPairs,
    OppositePairs,
}

impl std::fmt::Display for CaseClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            CaseClass::AllSame => "all-same",
            CaseClass::ThreeOne => "three-one",
            CaseClass::AdjacentPairs => "adjacent-pairs",
            CaseClass::OppositePairs => "opposite-pairs",
        };
        f.write_str(name)
    }
}

/// Classifies a four-party choice vector that uses at most two distinct
/// bases; None for anything else.
pub fn classify_four_party(choices: &[usize]) -> Option<CaseClass> {
    if choices.len() != 4 {
        return None;
    }
    let mut distinct: Vec<usize> = choices.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    match distinct.len() {
        1 => Some(CaseClass::AllSame),
        2 => {
            let minority = distinct
                .iter()
                .copied()
                .min_by_key(|&b| choices.iter().filter(|&&c| c == b).count())
                .expect("two distinct values");
            let positions: Vec<usize> = choices
                .iter()
                .enumerate()
                .filter_map(|(i, &c)| (c == minority).then_some(i))
                .collect();
            match positions.len() {
                1 | 3 => Some(CaseClass::ThreeOne),
                2 => {
                    let gap = positions[1] - positions[0];
                    if gap == 2 {
                        Some(CaseClass::OppositePairs)
                    } else {
                        Some(CaseClass::AdjacentPairs)
                    }
                }
                _ => unreachable!("minority of a 2-way split has 1..=2 members"),
            }
        }
        _ => None,
    }
}

/// Full table of every assignment of `num_bases` picks to `num_parties`
/// parties, in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Enumeration {
    pub num_parties: usize,
    pub num_bases: usize,
    pub rows: Vec<AssignmentRow>,
}

/// Aggregates for one four-party case class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseSummary {
    pub class: CaseClass,
    pub rows: usize,
    /// Fraction of the class where party 0 shares with at least one other.
    pub share_any: BigRational,
    /// Mean fraction of the other parties sharing with party 0.
    pub expected_fraction: BigRational,
}

impl Enumeration {
    /// Fraction of assignments in which party 0 shares with at least one
    /// other party, as an exact rational.
    pub fn share_with_any_fraction(&self) -> BigRational {
        fraction_over(&self.rows, |p| !p.sharers_with_first().is_empty())
    }

    /// Mean over assignments of (number of others sharing with party 0) /
    /// (N - 1), as an exact rational.
    pub fn expected_sharing_fraction(&self) -> BigRational {
        expected_fraction_over_rows(&self.rows)
    }

    /// Per-case-class aggregates; present only for the four-party two-base
    /// table where the classes are meaningful.
    pub fn case_summaries(&self) -> Option<Vec<CaseSummary>> {
        if self.num_parties != 4 || self.num_bases != 2 {
            return None;
        }
        let order = [
            CaseClass::AllSame,
            CaseClass::ThreeOne,
            CaseClass::AdjacentPairs,
            CaseClass::OppositePairs,
        ];
        let mut out = Vec::new();
        for class in order {
            let rows: Vec<AssignmentRow> = self
                .rows
                .iter()
                .filter(|r| classify_four_party(&r.choices) == Some(class))
                .cloned()
                .collect();
            out.push(CaseSummary {
                class,
                rows: rows.len(),
                share_any: fraction_over(&rows, |p| !p.sharers_with_first().is_empty()),
                expected_fraction: expected_fraction_over_rows(&rows),
            });
        }
        Some(out)
    }

    /// CSV with columns: choices (base letters), effective_bases, classes
    /// (semicolon-joined party groups), bitstring.
    pub fn to_csv(&self) -> String {
        let mut csv = String::from("choices,effective_bases,classes,bitstring\n");
        for row in &self.rows {
            let choices: String = row
                .choices
                .iter()
                .map(|&c| base_letter(c, self.num_bases))
                .collect();
            let effective: String = row
                .pattern
                .effective_bases
                .iter()
                .map(|&c| base_letter(c, self.num_bases))
                .collect();
            let classes: String = row
                .pattern
                .classes
                .iter()
                .map(|class| class.iter().map(|&p| party_letter(p)).collect::<String>())
                .collect::<Vec<_>>()
                .join(";");
            csv.push_str(&format!(
                "{choices},{effective},{classes},{}\n",
                row.pattern.bitstring()
            ));
        }
        csv
    }
}

pub fn enumerate_assignments(
    num_parties: usize,
    num_bases: usize,
    budget: u64,
) -> Result<Enumeration, OutcomeError> {
    assert!(num_parties >= 2, "need at least two parties");
    assert!(num_bases >= 1, "need at least one base");
    let assignments = (num_bases as u128)
        .checked_pow(num_parties as u32)
        .unwrap_or(u128::MAX);
    if assignments > budget as u128 {
        return Err(OutcomeError::BudgetExceeded { assignments, budget });
    }
    let mut rows = Vec::with_capacity(assignments as usize);
    let mut choices = vec![0usize; num_parties];
    loop {
        rows.push(AssignmentRow {
            choices: choices.clone(),
            pattern: sharing_pattern(&choices),
        });
        // Odometer increment, leftmost digit most significant.
        let mut i = num_parties;
        loop {
            if i == 0 {
                return Ok(Enumeration { num_parties, num_bases, rows });
            }
            i -= 1;
            choices[i] += 1;
            if choices[i] < num_bases {
                break;
            }
            choices[i] = 0;
        }
    }
}

/// Exact probability, over uniform random base picks, that `predicate` holds
/// of the resulting sharing pattern.
pub fn agreement_probability(
    num_parties: usize,
    num_bases: usize,
    predicate: impl Fn(&SharingPattern) -> bool,
    budget: u64,
) -> Result<BigRational, OutcomeError> {
    let table = enumerate_assignments(num_parties, num_bases, budget)?;
    Ok(fraction_over(&table.rows, |p| predicate(p)))
}

/// Exact probability of `predicate` over an explicit equiprobable case list.
pub fn agreement_probability_over(
    rows: &[Vec<usize>],
    predicate: impl Fn(&SharingPattern) -> bool,
) -> BigRational {
    let rows: Vec<AssignmentRow> = rows
        .iter()
        .map(|choices| AssignmentRow {
            choices: choices.clone(),
            pattern: sharing_pattern(choices),
        })
        .collect();
    fraction_over(&rows, |p| predicate(p))
}

/// Mean fraction of the other parties sharing party 0's key over an explicit
/// equiprobable case list.
pub fn expected_sharing_fraction_over(rows: &[Vec<usize>]) -> BigRational {
    let rows: Vec<AssignmentRow> = rows
        .iter()
        .map(|choices| AssignmentRow {
            choices: choices.clone(),
            pattern: sharing_pattern(choices),
        })
        .collect();
    expected_fraction_over_rows(&rows)
}

fn fraction_over(rows: &[AssignmentRow], predicate: impl Fn(&SharingPattern) -> bool) -> BigRational {
    if rows.is_empty() {
        return BigRational::from_integer(BigInt::from(0));
    }
    let hits = rows.iter().filter(|r| predicate(&r.pattern)).count();
    BigRational::new(BigInt::from(hits), BigInt::from(rows.len()))
}

fn expected_fraction_over_rows(rows: &[AssignmentRow]) -> BigRational {
    if rows.is_empty() {
        return BigRational::from_integer(BigInt::from(0));
    }
    let others = rows[0].pattern.num_parties() - 1;
    let sharer_total: usize = rows.iter().map(|r| r.pattern.sharers_with_first().len()).sum();
    BigRational::new(BigInt::from(sharer_total), BigInt::from(rows.len() * others))
}

/// The canonical four three-party rows: all-same plus the three placements
/// of a single minority pick.
pub fn table_rows_three_party() -> Vec<Vec<usize>> {
    vec![vec![0, 0, 0], vec![0, 0, 1], vec![0, 1, 0], vec![1, 0, 0]]
}

/// The canonical four four-party rows: one minority pick in each position,
/// rightmost first.
pub fn table_rows_four_party() -> Vec<Vec<usize>> {
    vec![
        vec![0, 0, 0, 1],
        vec![0, 0, 1, 0],
        vec![0, 1, 0, 0],
        vec![1, 0, 0, 0],
    ]
}

/// Display letter for a base index. Two-base setups use the u/w convention
/// the canonical tables are written in; anything else counts up from u.
pub fn base_letter(index: usize, num_bases: usize) -> char {
    const LETTERS: [char; 6] = ['u', 'v', 'w', 'x', 'y', 'z'];
    if num_bases == 2 {
        return ['u', 'w'][index.min(1)];
    }
    LETTERS.get(index).copied().unwrap_or('?')
}

/// Parses a base letter back to an index under the same convention.
pub fn parse_base_letter(letter: char, num_bases: usize) -> Option<usize> {
    const LETTERS: [char; 6] = ['u', 'v', 'w', 'x', 'y', 'z'];
    if num_bases == 2 {
        return match letter {
            'u' => Some(0),
            'w' => Some(1),
            _ => None,
        };
    }
    LETTERS.iter().position(|&l| l == letter)
}

/// Party display letter: position 0 is A.
pub fn party_letter(position: usize) -> char {
    (b'A' + (position % 26) as u8) as char
}

/// Renders a sharing pattern the way the case tables phrase it, e.g.
/// "A, C share key" or "B, C don't share key with A".
pub fn result_string(pattern: &SharingPattern) -> String {
    let n = pattern.num_parties();
    let oxford = n >= 4;
    let sharers = pattern.sharers_with_first();
    if sharers.is_empty() {
        let others: Vec<char> = (1..n).map(party_letter).collect();
        format!(
            "{} don't share key with A",
            join_names(&others, oxford && others.len() >= 3)
        )
    } else {
        let mut names = vec![party_letter(0)];
        names.extend(sharers.iter().map(|&p| party_letter(p)));
        format!("{} share key", join_names(&names, oxford && names.len() >= 3))
    }
}

fn join_names(names: &[char], oxford: bool) -> String {
    match names.len() {
        0 => String::new(),
        1 => names[0].to_string(),
        2 => format!("{}, {}", names[0], names[1]),
        _ => {
            let head: Vec<String> = names[..names.len() - 1].iter().map(|c| c.to_string()).collect();
            let comma = if oxford { "," } else { "" };
            format!("{}{comma} and {}", head.join(", "), names[names.len() - 1])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modmath::GroupParams;
    use crate::protocol::run_ceremony;
    use num_bigint::BigUint;
    use proptest::prelude::*;

    fn pattern(choices: &[usize]) -> SharingPattern {
        sharing_pattern(choices)
    }

    #[test]
    fn effective_bases_rotates_left() {
        assert_eq!(effective_bases(&[0, 0, 1]), vec![0, 1, 0]);
        assert_eq!(effective_bases(&[0, 0, 0]), vec![0, 0, 0]);
        assert_eq!(effective_bases(&[0, 0, 0, 1]), vec![0, 0, 1, 0]);
    }

    #[test]
    fn three_party_bitstrings() {
        assert_eq!(pattern(&[0, 0, 0]).bitstring(), "11");
        assert_eq!(pattern(&[0, 0, 1]).bitstring(), "01");
        assert_eq!(pattern(&[0, 1, 0]).bitstring(), "00");
        assert_eq!(pattern(&[1, 0, 0]).bitstring(), "10");
    }

    #[test]
    fn four_party_bitstrings() {
        // The middle entry is 011, consistent with the case table's own
        // result text ("A, C, and D share key"); the compressed reference
        // sequence list prints 010 there, which contradicts that text.
        assert_eq!(pattern(&[0, 0, 0, 1]).bitstring(), "101");
        assert_eq!(pattern(&[0, 0, 1, 0]).bitstring(), "011");
        assert_eq!(pattern(&[0, 1, 0, 0]).bitstring(), "000");
        assert_eq!(pattern(&[1, 0, 0, 0]).bitstring(), "110");
        // Adjacent pairs: only D shares with A. Alternating: C shares with A.
        assert_eq!(pattern(&[0, 0, 1, 1]).bitstring(), "001");
        assert_eq!(pattern(&[0, 1, 0, 1]).bitstring(), "010");
    }

    #[test]
    fn classes_partition_positions() {
        let p = pattern(&[0, 0, 1, 1]);
        assert_eq!(p.classes, vec![vec![0, 3], vec![1, 2]]);
        let p = pattern(&[0, 1, 0, 1]);
        assert_eq!(p.classes, vec![vec![0, 2], vec![1, 3]]);
    }

    #[test]
    fn result_strings_match_table_phrasing() {
        assert_eq!(result_string(&pattern(&[0, 0, 0])), "A, B and C share key");
        assert_eq!(result_string(&pattern(&[0, 0, 1])), "A, C share key");
        assert_eq!(result_string(&pattern(&[0, 1, 0])), "B, C don't share key with A");
        assert_eq!(result_string(&pattern(&[1, 0, 0])), "A, B share key");
        assert_eq!(result_string(&pattern(&[0, 0, 0, 1])), "A, B, and D share key");
        assert_eq!(result_string(&pattern(&[0, 0, 1, 0])), "A, C, and D share key");
        assert_eq!(
            result_string(&pattern(&[0, 1, 0, 0])),
            "B, C, and D don't share key with A"
        );
        assert_eq!(result_string(&pattern(&[1, 0, 0, 0])), "A, B, and C share key");
    }

    #[test]
    fn enumeration_row_counts() {
        let e = enumerate_assignments(3, 1, 100).unwrap();
        assert_eq!(e.rows.len(), 1);
        assert_eq!(e.rows[0].pattern.bitstring(), "11");

        let e = enumerate_assignments(3, 2, 100).unwrap();
        assert_eq!(e.rows.len(), 8);
        let e = enumerate_assignments(4, 3, 1000).unwrap();
        assert_eq!(e.rows.len(), 81);

        assert_eq!(
            enumerate_assignments(10, 10, 100).unwrap_err(),
            OutcomeError::BudgetExceeded { assignments: 10_000_000_000, budget: 100 }
        );
    }

    #[test]
    fn canonical_rows_give_documented_patterns() {
        let three: Vec<String> = table_rows_three_party()
            .iter()
            .map(|row| sharing_pattern(row).bitstring())
            .collect();
        assert_eq!(three, vec!["11", "01", "00", "10"]);

        let four: Vec<String> = table_rows_four_party()
            .iter()
            .map(|row| sharing_pattern(row).bitstring())
            .collect();
        assert_eq!(four, vec!["101", "011", "000", "110"]);
    }

    #[test]
    fn agreement_probabilities() {
        let one = BigRational::from_integer(1.into());
        assert_eq!(
            agreement_probability(3, 1, |p| !p.sharers_with_first().is_empty(), 100).unwrap(),
            one
        );
        // Over the canonical three-party rows, A shares in three of four.
        assert_eq!(
            agreement_probability_over(&table_rows_three_party(), |p| {
                !p.sharers_with_first().is_empty()
            }),
            BigRational::new(3.into(), 4.into())
        );
        // Over the canonical four-party rows the sharer counts are 2,2,0,2
        // out of 3 each: 6/12 = 1/2. The documented reference value is 4/9;
        // the enumeration is the authority here.
        assert_eq!(
            expected_sharing_fraction_over(&table_rows_four_party()),
            BigRational::new(1.into(), 2.into())
        );
    }

    #[test]
    fn case_classification() {
        assert_eq!(classify_four_party(&[0, 0, 0, 0]), Some(CaseClass::AllSame));
        assert_eq!(classify_four_party(&[0, 0, 0, 1]), Some(CaseClass::ThreeOne));
        assert_eq!(classify_four_party(&[1, 0, 1, 1]), Some(CaseClass::ThreeOne));
        assert_eq!(classify_four_party(&[0, 0, 1, 1]), Some(CaseClass::AdjacentPairs));
        assert_eq!(classify_four_party(&[1, 0, 0, 1]), Some(CaseClass::AdjacentPairs));
        assert_eq!(classify_four_party(&[0, 1, 0, 1]), Some(CaseClass::OppositePairs));
        assert_eq!(classify_four_party(&[0, 1, 2, 0]), None);
        assert_eq!(classify_four_party(&[0, 0, 0]), None);

        let e = enumerate_assignments(4, 2, 100).unwrap();
        let summaries = e.case_summaries().unwrap();
        let rows: Vec<usize> = summaries.iter().map(|s| s.rows).collect();
        assert_eq!(rows, vec![2, 8, 4, 2]);
    }

    #[test]
    fn csv_export_shape() {
        let e = enumerate_assignments(3, 2, 100).unwrap();
        let csv = e.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "choices,effective_bases,classes,bitstring");
        assert_eq!(lines.len(), 9);
        assert_eq!(lines[1], "uuu,uuu,ABC,11");
        assert_eq!(lines[2], "uuw,uwu,AC;B,01");
    }

    proptest! {
        /// The central cross-module check: the closed-form classes equal the
        /// key-equality partition of a real ceremony. Secrets are drawn
        /// coprime to p-1 so exponentiation is a bijection and base equality
        /// is the only source of key equality.
        #[test]
        fn classes_match_real_ceremonies(
            n in 2usize..=5,
            num_bases in 1usize..=3,
            p_idx in 0usize..3,
            seed in any::<u64>(),
        ) {
            use num_integer::Integer;
            use rand::{Rng, SeedableRng};
            let primes = [23u64, 101, 257];
            let all_bases = [2u64, 3, 5];
            let p = BigUint::from(primes[p_idx]);
            let bases: Vec<BigUint> = all_bases[..num_bases].iter().map(|&b| BigUint::from(b)).collect();
            let params = GroupParams::new(p.clone(), bases, 1);
            let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
            let totient = &p - 1u32;
            let one = BigUint::from(1u32);
            let secrets: Vec<BigUint> = (0..n)
                .map(|_| loop {
                    let s = crate::protocol::random_secrets(&params, 1, &mut rng).unwrap().remove(0);
                    if s.gcd(&totient) == one {
                        break s;
                    }
                })
                .collect();
            let choices: Vec<usize> = (0..n).map(|_| rng.gen_range(0..num_bases)).collect();

            let t = run_ceremony(&params, "prop", &secrets, &choices).unwrap();
            let mut observed: Vec<(crate::modmath::Element, Vec<usize>)> = Vec::new();
            for (i, key) in t.final_keys.iter().enumerate() {
                match observed.iter_mut().find(|(k, _)| k == key) {
                    Some((_, members)) => members.push(i),
                    None => observed.push((key.clone(), vec![i])),
                }
            }
            let mut observed: Vec<Vec<usize>> = observed.into_iter().map(|(_, m)| m).collect();
            observed.sort_by_key(|c| c[0]);

            let predicted = sharing_pattern(&choices);
            prop_assert_eq!(predicted.classes, observed);
        }

        /// Rotation soundness: i and j share iff their successors picked the
        /// same base.
        #[test]
        fn rotation_soundness(choices in proptest::collection::vec(0usize..3, 2..7)) {
            let p = sharing_pattern(&choices);
            let n = choices.len();
            for i in 0..n {
                for j in 0..n {
                    let same_class = p.classes.iter().any(|c| c.contains(&i) && c.contains(&j));
                    let same_eff = choices[(i + 1) % n] == choices[(j + 1) % n];
                    prop_assert_eq!(same_class, same_eff);
                }
            }
        }

        /// Classes always partition the positions.
        #[test]
        fn classes_partition(choices in proptest::collection::vec(0usize..4, 2..8)) {
            let p = sharing_pattern(&choices);
            let mut seen: Vec<usize> = p.classes.concat();
            seen.sort_unstable();
            let expected: Vec<usize> = (0..choices.len()).collect();
            prop_assert_eq!(seen, expected);
        }
    }
}
