//! Words over the five-glyph alphabet `{+, -, 0, 1, .}` and their product
//! powers.
//!
//! A single-track word `s a_n ... a_0 . b_0 b_1 ...` denotes the real
//! `(-1)^sign(s) * (sum a_i 2^i + sum b_i 2^-(i+1))`; multi-track words put
//! one such word on each track with the signs and the point aligned.
//! Infinite words are handled exclusively in ultimately periodic form as
//! [`LassoWord`]s (finite prefix plus nonempty cycle), which is exactly the
//! shape of Buchi emptiness witnesses.
//!
//! Symbols are packed three bits per track into a `u64`, so arities up to
//! 21 are supported; the automata built here stay far below that.

use crate::rational::Q;
use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// One glyph of the base alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Glyph {
    Plus = 0,
    Minus = 1,
    Zero = 2,
    One = 3,
    Point = 4,
}

impl Glyph {
    pub fn as_char(&self) -> char {
        match self {
            Glyph::Plus => '+',
            Glyph::Minus => '-',
            Glyph::Zero => '0',
            Glyph::One => '1',
            Glyph::Point => '.',
        }
    }

    pub fn from_char(c: char) -> Option<Glyph> {
        match c {
            '+' => Some(Glyph::Plus),
            '-' => Some(Glyph::Minus),
            '0' => Some(Glyph::Zero),
            '1' => Some(Glyph::One),
            '.' => Some(Glyph::Point),
            _ => None,
        }
    }

    fn from_bits(bits: u64) -> Glyph {
        match bits {
            0 => Glyph::Plus,
            1 => Glyph::Minus,
            2 => Glyph::Zero,
            3 => Glyph::One,
            4 => Glyph::Point,
            _ => unreachable!("invalid glyph bits"),
        }
    }

    /// Digit value for `0`/`1`, `None` otherwise.
    pub fn bit(&self) -> Option<u8> {
        match self {
            Glyph::Zero => Some(0),
            Glyph::One => Some(1),
            _ => None,
        }
    }

    pub fn is_sign(&self) -> bool {
        matches!(self, Glyph::Plus | Glyph::Minus)
    }

    pub fn is_bit(&self) -> bool {
        matches!(self, Glyph::Zero | Glyph::One)
    }
}

/// Maximum supported arity (three bits per track in a `u64`).
pub const MAX_ARITY: usize = 21;

/// A product symbol: one glyph per track, packed.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol(u64);

impl Symbol {
    pub fn from_glyphs(glyphs: &[Glyph]) -> Symbol {
        assert!(glyphs.len() <= MAX_ARITY, "arity too large");
        let mut bits = 0u64;
        for (i, g) in glyphs.iter().enumerate() {
            bits |= (*g as u64) << (3 * i);
        }
        Symbol(bits)
    }

    pub fn track(&self, i: usize) -> Glyph {
        Glyph::from_bits((self.0 >> (3 * i)) & 0b111)
    }

    pub fn glyphs(&self, arity: usize) -> Vec<Glyph> {
        (0..arity).map(|i| self.track(i)).collect()
    }

    /// Restriction to the given tracks, in the given order.
    pub fn select(&self, tracks: &[usize]) -> Symbol {
        let glyphs: Vec<Glyph> = tracks.iter().map(|&t| self.track(t)).collect();
        Symbol::from_glyphs(&glyphs)
    }

    /// Concatenate the tracks of two symbols.
    pub fn concat(&self, left_arity: usize, right: Symbol, right_arity: usize) -> Symbol {
        let mut glyphs = self.glyphs(left_arity);
        glyphs.extend(right.glyphs(right_arity));
        Symbol::from_glyphs(&glyphs)
    }

    /// The uniform symbol with the same glyph on every track.
    pub fn uniform(glyph: Glyph, arity: usize) -> Symbol {
        Symbol::from_glyphs(&vec![glyph; arity])
    }

    pub fn render(&self, arity: usize) -> String {
        self.glyphs(arity).iter().map(Glyph::as_char).collect()
    }

    pub fn raw(&self) -> u64 {
        self.0
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Symbol({:#o})", self.0)
    }
}

/// All sign-vector symbols of the given arity (`2^arity` of them).
pub fn sign_symbols(arity: usize) -> Vec<Symbol> {
    enumerate_symbols(arity, &[Glyph::Plus, Glyph::Minus])
}

/// All bit-vector symbols of the given arity (`2^arity` of them).
pub fn bit_symbols(arity: usize) -> Vec<Symbol> {
    enumerate_symbols(arity, &[Glyph::Zero, Glyph::One])
}

/// The aligned point symbol.
pub fn point_symbol(arity: usize) -> Symbol {
    Symbol::uniform(Glyph::Point, arity)
}

fn enumerate_symbols(arity: usize, choices: &[Glyph]) -> Vec<Symbol> {
    let mut out = Vec::with_capacity(choices.len().pow(arity as u32));
    let mut stack = vec![Vec::with_capacity(arity)];
    while let Some(prefix) = stack.pop() {
        if prefix.len() == arity {
            out.push(Symbol::from_glyphs(&prefix));
            continue;
        }
        // Depth-first in reverse so the output is lexicographic.
        for g in choices.iter().rev() {
            let mut next = prefix.clone();
            next.push(*g);
            stack.push(next);
        }
    }
    out
}

/// All symbols of the full alphabet at the given arity (`5^arity`).
pub fn all_symbols(arity: usize) -> Vec<Symbol> {
    enumerate_symbols(
        arity,
        &[Glyph::Plus, Glyph::Minus, Glyph::Zero, Glyph::One, Glyph::Point],
    )
}

/// An ultimately periodic word: `prefix . cycle^omega`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LassoWord {
    pub arity: usize,
    pub prefix: Vec<Symbol>,
    pub cycle: Vec<Symbol>,
}

impl LassoWord {
    pub fn new(arity: usize, prefix: Vec<Symbol>, cycle: Vec<Symbol>) -> LassoWord {
        assert!(!cycle.is_empty(), "cycle must be nonempty");
        LassoWord {
            arity,
            prefix,
            cycle,
        }
    }

    /// Symbol at position `i` of the infinite word.
    pub fn at(&self, i: usize) -> Symbol {
        if i < self.prefix.len() {
            self.prefix[i]
        } else {
            self.cycle[(i - self.prefix.len()) % self.cycle.len()]
        }
    }

    /// Restrict to a subset of tracks (in the given order).
    pub fn select_tracks(&self, tracks: &[usize]) -> LassoWord {
        LassoWord {
            arity: tracks.len(),
            prefix: self.prefix.iter().map(|s| s.select(tracks)).collect(),
            cycle: self.cycle.iter().map(|s| s.select(tracks)).collect(),
        }
    }

    /// Zip two lassos into one over the concatenated tracks. The cycle of
    /// the result has length lcm of the two cycle lengths.
    pub fn zip(&self, other: &LassoWord) -> LassoWord {
        let prefix_len = self.prefix.len().max(other.prefix.len());
        let cycle_len = self.cycle.len().lcm(&other.cycle.len());
        let mut prefix = Vec::with_capacity(prefix_len);
        for i in 0..prefix_len {
            prefix.push(
                self.at(i)
                    .concat(self.arity, other.at(i), other.arity),
            );
        }
        let mut cycle = Vec::with_capacity(cycle_len);
        for i in prefix_len..prefix_len + cycle_len {
            cycle.push(
                self.at(i)
                    .concat(self.arity, other.at(i), other.arity),
            );
        }
        LassoWord::new(self.arity + other.arity, prefix, cycle)
    }

    pub fn render(&self) -> String {
        let pre: Vec<String> = self.prefix.iter().map(|s| s.render(self.arity)).collect();
        let cyc: Vec<String> = self.cycle.iter().map(|s| s.render(self.arity)).collect();
        format!("{}({})^w", pre.join(" "), cyc.join(" "))
    }
}

impl Serialize for LassoWord {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            arity: usize,
            prefix: Vec<String>,
            cycle: Vec<String>,
        }
        Repr {
            arity: self.arity,
            prefix: self.prefix.iter().map(|x| x.render(self.arity)).collect(),
            cycle: self.cycle.iter().map(|x| x.render(self.arity)).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LassoWord {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        #[derive(Deserialize)]
        struct Repr {
            arity: usize,
            prefix: Vec<String>,
            cycle: Vec<String>,
        }
        let repr = Repr::deserialize(d)?;
        let parse = |s: &String| -> Result<Symbol, D::Error> {
            let glyphs: Option<Vec<Glyph>> = s.chars().map(Glyph::from_char).collect();
            let glyphs = glyphs.ok_or_else(|| D::Error::custom("bad glyph"))?;
            if glyphs.len() != repr.arity {
                return Err(D::Error::custom("symbol arity mismatch"));
            }
            Ok(Symbol::from_glyphs(&glyphs))
        };
        let prefix = repr.prefix.iter().map(parse).collect::<Result<_, _>>()?;
        let cycle: Vec<Symbol> = repr.cycle.iter().map(parse).collect::<Result<_, _>>()?;
        if cycle.is_empty() {
            return Err(D::Error::custom("empty cycle"));
        }
        Ok(LassoWord::new(repr.arity, prefix, cycle))
    }
}

/// Why a single-track lasso fails to decode.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("word must have arity 1, got {0}")]
    NotSingleTrack(usize),
    #[error("word must start with a sign")]
    MissingSign,
    #[error("expected a binary digit at position {0}")]
    BadDigit(usize),
    #[error("expected exactly one point, found none in the prefix")]
    MissingPoint,
    #[error("unexpected extra sign or point at position {0}")]
    BadShape(usize),
    #[error("the cycle must consist of binary digits only")]
    BadCycle,
}

/// Decode a well-formed single-track lasso into the exact rational it
/// denotes.
pub fn decode(word: &LassoWord) -> Result<Q, DecodeError> {
    if word.arity != 1 {
        return Err(DecodeError::NotSingleTrack(word.arity));
    }
    let glyph = |s: &Symbol| s.track(0);
    // The point must occur in the prefix: an ultimately periodic word with
    // exactly one point cannot carry it in the cycle.
    for s in &word.cycle {
        if !glyph(s).is_bit() {
            return Err(DecodeError::BadCycle);
        }
    }
    let mut it = word.prefix.iter().enumerate();
    let negative = match it.next() {
        Some((_, s)) if glyph(s).is_sign() => glyph(s) == Glyph::Minus,
        _ => return Err(DecodeError::MissingSign),
    };
    // Integer digits up to the point.
    let mut int_part = BigUint::zero();
    let mut saw_digit = false;
    let mut frac_digits: Vec<u8> = Vec::new();
    let mut after_point = false;
    for (pos, s) in it {
        match glyph(s) {
            Glyph::Point if !after_point => {
                if !saw_digit {
                    return Err(DecodeError::BadDigit(pos));
                }
                after_point = true;
            }
            Glyph::Point => return Err(DecodeError::BadShape(pos)),
            Glyph::Plus | Glyph::Minus => return Err(DecodeError::BadShape(pos)),
            g => {
                let bit = g.bit().expect("glyph is a digit");
                if after_point {
                    frac_digits.push(bit);
                } else {
                    saw_digit = true;
                    int_part = (int_part << 1) + BigUint::from(bit);
                }
            }
        }
    }
    if !after_point {
        return Err(DecodeError::MissingPoint);
    }
    // Fractional part: finite prefix digits plus the repeating cycle, as a
    // closed-form geometric series. Digit blocks are packed in one pass so
    // long cycles stay linear.
    let mut value = Q::from_integer(BigInt::from(int_part));
    let f = frac_digits.len();
    if frac_digits.contains(&1) {
        let packed = BigUint::from_radix_be(&frac_digits, 2).expect("binary digits");
        value += Q::new(BigInt::from(packed), BigInt::from(BigUint::one() << f));
    }
    // Cycle digits c_0..c_{p-1} start at weight 2^-(f+1) and contribute
    // (sum c_i 2^{p-1-i}) / (2^p - 1) * 2^-f.
    let p = word.cycle.len();
    let cycle_digits: Vec<u8> = word
        .cycle
        .iter()
        .map(|s| glyph(s).bit().expect("checked above"))
        .collect();
    if cycle_digits.contains(&1) {
        let cycle_num = BigUint::from_radix_be(&cycle_digits, 2).expect("binary digits");
        let denom = ((BigUint::one() << p) - BigUint::one()) << f;
        value += Q::new(BigInt::from(cycle_num), BigInt::from(denom));
    }
    if negative {
        value = -value;
    }
    Ok(value)
}

/// Encode a rational as a single-track lasso: `+` for nonnegative values,
/// minimal integer digits, and the eventually periodic binary expansion of
/// the fractional part.
pub fn encode(q: &Q) -> LassoWord {
    let negative = q.is_negative();
    let mag = q.abs();
    let int_part: BigUint = (mag.numer() / mag.denom()).to_biguint().expect("nonneg");
    let mut frac_num: BigUint = (mag.numer() - mag.denom() * BigInt::from(int_part.clone()))
        .to_biguint()
        .expect("nonneg remainder");
    let denom: BigUint = mag.denom().to_biguint().expect("positive denominator");

    let mut prefix = Vec::new();
    prefix.push(Symbol::from_glyphs(&[if negative {
        Glyph::Minus
    } else {
        Glyph::Plus
    }]));
    let int_digits = if int_part.is_zero() {
        "0".to_string()
    } else {
        format!("{:b}", int_part)
    };
    for c in int_digits.chars() {
        prefix.push(Symbol::from_glyphs(&[if c == '1' {
            Glyph::One
        } else {
            Glyph::Zero
        }]));
    }
    prefix.push(Symbol::from_glyphs(&[Glyph::Point]));

    // Long division base 2 on the fractional remainder. The remainder
    // sequence r <- 2r mod den is purely periodic once the factor 2^a of
    // den is cleared (a = trailing zero bits), so after a prefix of a
    // digits the cycle is everything up to the first return to the anchor
    // remainder; no remainder table is needed.
    let (frac_prefix, frac_cycle) = if frac_num.is_zero() {
        (Vec::new(), vec![Glyph::Zero])
    } else {
        let tail = denom.trailing_zeros().unwrap_or(0) as usize;
        match (frac_num.to_u64(), denom.to_u64()) {
            (Some(mut r), Some(d)) if d <= u64::MAX / 2 => {
                let digit = |r: &mut u64| {
                    *r *= 2;
                    if *r >= d {
                        *r -= d;
                        Glyph::One
                    } else {
                        Glyph::Zero
                    }
                };
                let mut pre = Vec::with_capacity(tail);
                for _ in 0..tail {
                    pre.push(digit(&mut r));
                }
                if r == 0 {
                    (pre, vec![Glyph::Zero])
                } else {
                    let anchor = r;
                    let mut cyc = vec![digit(&mut r)];
                    while r != anchor {
                        cyc.push(digit(&mut r));
                    }
                    (pre, cyc)
                }
            }
            _ => {
                let digit = |r: &mut BigUint| {
                    *r <<= 1;
                    if *r >= denom {
                        *r -= &denom;
                        Glyph::One
                    } else {
                        Glyph::Zero
                    }
                };
                let mut pre = Vec::with_capacity(tail);
                for _ in 0..tail {
                    pre.push(digit(&mut frac_num));
                }
                if frac_num.is_zero() {
                    (pre, vec![Glyph::Zero])
                } else {
                    let anchor = frac_num.clone();
                    let mut cyc = vec![digit(&mut frac_num)];
                    while frac_num != anchor {
                        cyc.push(digit(&mut frac_num));
                    }
                    (pre, cyc)
                }
            }
        }
    };
    for g in frac_prefix {
        prefix.push(Symbol::from_glyphs(&[g]));
    }
    let cycle = frac_cycle
        .into_iter()
        .map(|g| Symbol::from_glyphs(&[g]))
        .collect();
    LassoWord::new(1, prefix, cycle)
}

/// Encode a vector as an aligned multi-track lasso.
pub fn encode_vec(values: &[Q]) -> LassoWord {
    assert!(!values.is_empty());
    align_tracks(&values.iter().map(encode).collect::<Vec<_>>())
}

/// Align single-track encodings into one well-formed multi-track word by
/// padding integer parts with leading zeros and zipping.
pub fn align_tracks(words: &[LassoWord]) -> LassoWord {
    assert!(words.iter().all(|w| w.arity == 1));
    let int_len = |w: &LassoWord| {
        w.prefix
            .iter()
            .position(|s| s.track(0) == Glyph::Point)
            .expect("encoded words carry their point in the prefix")
            - 1
    };
    let widest = words.iter().map(int_len).max().expect("nonempty");
    let padded: Vec<LassoWord> = words
        .iter()
        .map(|w| pad_integer_digits(w, widest - int_len(w)))
        .collect();
    let mut result = padded[0].clone();
    for w in &padded[1..] {
        result = result.zip(w);
    }
    result
}

/// Prepend `extra` leading zero digits to the integer part; the decoded
/// value is unchanged.
pub fn pad_integer_digits(word: &LassoWord, extra: usize) -> LassoWord {
    assert_eq!(word.arity, 1);
    let mut prefix = Vec::with_capacity(word.prefix.len() + extra);
    prefix.push(word.prefix[0]);
    for _ in 0..extra {
        prefix.push(Symbol::from_glyphs(&[Glyph::Zero]));
    }
    prefix.extend(word.prefix[1..].iter().copied());
    LassoWord::new(1, prefix, word.cycle.clone())
}

/// The other binary expansion of the same value, when one exists: for
/// values with a terminating expansion, the trailing-ones form (for zero,
/// the sign-flipped form). Returns `None` when the expansion does not
/// terminate.
pub fn dual_encoding(q: &Q) -> Option<LassoWord> {
    let canonical = encode(q);
    if q.is_zero() {
        let mut prefix = canonical.prefix.clone();
        prefix[0] = Symbol::from_glyphs(&[Glyph::Minus]);
        return Some(LassoWord::new(1, prefix, canonical.cycle));
    }
    // Terminating expansions end with cycle (0)^w.
    if canonical.cycle != vec![Symbol::from_glyphs(&[Glyph::Zero])] {
        return None;
    }
    // |q| = m * 2^-t with m >= 1; the dual is (m - 1) * 2^-t followed by
    // all-ones (a binary decrement with borrow, then the (1)^w tail).
    let point_at = canonical
        .prefix
        .iter()
        .position(|s| s.track(0) == Glyph::Point)
        .expect("point is in the prefix");
    let t = canonical.prefix.len() - point_at - 1;
    let m_minus_one = (q.abs().numer() * (BigInt::one() << t) / q.denom() - BigInt::one())
        .to_biguint()
        .expect("magnitude is at least one ulp");
    let digits = format!("{:0>width$b}", m_minus_one, width = t + 1);
    let (int_digits, frac_digits) = digits.split_at(digits.len() - t);
    let mut prefix = vec![canonical.prefix[0]];
    for c in int_digits.chars().chain(".".chars()).chain(frac_digits.chars()) {
        prefix.push(Symbol::from_glyphs(&[Glyph::from_char(c).expect("binary or point")]));
    }
    Some(LassoWord::new(
        1,
        prefix,
        vec![Symbol::from_glyphs(&[Glyph::One])],
    ))
}

/// Decode each track of a multi-track lasso.
pub fn decode_tracks(word: &LassoWord) -> Result<Vec<Q>, DecodeError> {
    (0..word.arity)
        .map(|t| decode(&word.select_tracks(&[t])))
        .collect()
}
