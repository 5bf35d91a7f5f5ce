//! Seeded random streams and synthetic identities and coach notes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::redaction::names::{FIRST_NAMES, LAST_NAMES};
use crate::vault::{FieldContext, IdentityFields};

/// Independent random streams of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Stream {
    Cohort,
    Identity,
    Vault,
    Behavior,
    Notes,
}

impl Stream {
    fn tag(self) -> &'static [u8] {
        match self {
            Stream::Cohort => b"cohort",
            Stream::Identity => b"identity",
            Stream::Vault => b"vault",
            Stream::Behavior => b"behavior",
            Stream::Notes => b"notes",
        }
    }
}

/// 32-byte seed for stream `(seed, stream, a, b)`. Each coordinate gets its
/// own generator, so what one user draws never depends on how many draws
/// another user or arm made.
pub(crate) fn stream_seed(seed: u64, stream: Stream, a: u64, b: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(stream.tag());
    h.update([0u8]);
    h.update(seed.to_be_bytes());
    h.update(a.to_be_bytes());
    h.update(b.to_be_bytes());
    h.finalize().into()
}

pub(crate) fn stream_rng(seed: u64, stream: Stream, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(stream_seed(seed, stream, a, b))
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Poisson draw by CDF inversion of one uniform, so that for a fixed
/// uniform the count never decreases as the rate grows.
pub(crate) fn poisson_from_uniform(rate: f64, u: f64) -> u32 {
    if rate <= 0.0 {
        return 0;
    }
    let mut p = (-rate).exp();
    let mut cdf = p;
    let mut k = 0u32;
    while u > cdf && k < 10_000 {
        k += 1;
        p *= rate / f64::from(k);
        cdf += p;
        if p == 0.0 && cdf < u {
            break;
        }
    }
    k
}

const STREETS: &[&str] = &["Maple", "Cedar", "Willow", "Birch", "Juniper", "Laurier", "Sherbrooke", "Rideau"];
const SUFFIXES: &[&str] = &["Street", "Avenue", "Road", "Boulevard", "Drive", "Lane"];
const DOMAINS: &[&str] = &["example.org", "mail.example.com", "inbox.example.net"];

fn pick<'a, R: Rng>(rng: &mut R, xs: &'a [&'a str]) -> &'a str {
    xs[rng.random_range(0..xs.len())]
}

pub(crate) fn phone<R: Rng>(rng: &mut R) -> String {
    format!("({}{:02}) 555-{:04}", rng.random_range(2..10), rng.random_range(0..100), rng.random_range(0..10_000))
}

pub(crate) fn email<R: Rng>(rng: &mut R, first: &str, last: &str) -> String {
    format!(
        "{}.{}{}@{}",
        first.to_lowercase(),
        last.to_lowercase(),
        rng.random_range(1..100),
        pick(rng, DOMAINS)
    )
}

pub(crate) fn address<R: Rng>(rng: &mut R) -> String {
    format!("{} {} {}", rng.random_range(1..9999), pick(rng, STREETS), pick(rng, SUFFIXES))
}

pub(crate) fn dob<R: Rng>(rng: &mut R) -> String {
    format!("{}-{:02}-{:02}", rng.random_range(1950..2004), rng.random_range(1..13), rng.random_range(1..29))
}

/// The registration payload of user `index` in a run seeded with `seed`.
///
/// Recomputable so privacy tests can search outputs for these values; the
/// simulator itself only ever hands them to the vault.
pub fn synthetic_identity(seed: u64, index: usize) -> IdentityFields {
    let mut rng = stream_rng(seed, Stream::Identity, index as u64, 0);
    let first = pick(&mut rng, FIRST_NAMES);
    let last = pick(&mut rng, LAST_NAMES);
    let email = email(&mut rng, first, last);
    IdentityFields::new()
        .with(FieldContext::Name, format!("{first} {last}"))
        .with(FieldContext::Email, email)
        .with(FieldContext::Phone, phone(&mut rng))
        .with(FieldContext::Dob, dob(&mut rng))
        .with(FieldContext::Address, address(&mut rng))
}

/// A free-text coach note of the kind a summary is built from. Notes mix
/// behavior with incidental identifiers so that redaction is exercised.
pub(crate) fn coach_note<R: Rng>(rng: &mut R, streak: u32, trend: &str) -> String {
    let first = pick(rng, FIRST_NAMES);
    let last = pick(rng, LAST_NAMES);
    let behavior = match streak {
        0 => format!("engagement {trend}"),
        1 => "missed yesterday's check-in".to_string(),
        n => format!("missed {n} check-ins"),
    };
    let extra = match rng.random_range(0..7) {
        0 => format!("{first} mentioned a busy week at work"),
        1 => format!("prefers email at {}", email(rng, first, last)),
        2 => format!("asked for a call back at {}", phone(rng)),
        3 => format!("walks near {} most evenings", address(rng)),
        4 => format!("birthday is {}", dob(rng)),
        5 => format!("{first} {last} from the group sends encouragement"),
        _ => "no other notes".to_string(),
    };
    format!("{behavior}; {extra}")
}
