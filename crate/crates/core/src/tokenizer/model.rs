use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::{TokenizerError, MARKER};
use crate::lang::is_decimal_digit;

pub const UNK_ID: u32 = 0;
pub const BOS_ID: u32 = 1;
pub const EOS_ID: u32 = 2;
pub const PAD_ID: u32 = 3;
pub const MARKER_ID: u32 = 4;
pub const SPECIAL_TOKENS: [&str; 5] = ["<unk>", "<s>", "</s>", "<pad>", "\u{2581}"];
pub const BYTE_TOKENS: usize = 256;

pub const MAGIC: &[u8; 4] = b"ITOK";
pub const FORMAT_VERSION: u32 = 1;

/// A learned merge: `left + right → result`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Merge {
    pub left: u32,
    pub right: u32,
    pub result: u32,
}

/// A run of symbols inside one word, or an atom that never takes part in
/// merges (a split digit or an out-of-alphabet character).
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Piece {
    Run(Vec<u32>),
    Atom(char),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenizerModel {
    tokens: Vec<String>,
    freqs: Vec<u64>,
    alphabet_len: usize,
    merges: Vec<Merge>,
    byte_fallback: bool,
    split_digits: bool,
    character_coverage: f64,
    disabled: Vec<bool>,
    char_ids: HashMap<char, u32>,
    ranks: HashMap<(u32, u32), (u32, u32)>,
}

impl TokenizerModel {
    pub(crate) fn from_parts(
        alphabet: Vec<(char, u64)>,
        merges: Vec<(Merge, String, u64)>,
        byte_fallback: bool,
        split_digits: bool,
        character_coverage: f64,
    ) -> TokenizerModel {
        let mut tokens: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
        let mut freqs = vec![0; tokens.len()];
        if byte_fallback {
            tokens.extend((0..BYTE_TOKENS).map(|b| format!("<0x{b:02X}>")));
            freqs.resize(tokens.len(), 0);
        }
        let alphabet_len = alphabet.len();
        for (c, n) in alphabet {
            tokens.push(c.to_string());
            freqs.push(n);
        }
        let mut ms = Vec::with_capacity(merges.len());
        for (m, s, n) in merges {
            if m.result as usize == tokens.len() {
                tokens.push(s);
                freqs.push(n);
            }
            ms.push(m);
        }
        let disabled = vec![false; tokens.len()];
        let mut model = TokenizerModel {
            tokens,
            freqs,
            alphabet_len,
            merges: ms,
            byte_fallback,
            split_digits,
            character_coverage,
            disabled,
            char_ids: HashMap::new(),
            ranks: HashMap::new(),
        };
        model.index();
        model
    }

    fn index(&mut self) {
        let first = self.first_alphabet_id();
        self.char_ids = (0..self.alphabet_len)
            .map(|i| {
                let id = first + i as u32;
                (self.tokens[id as usize].chars().next().expect("alphabet token"), id)
            })
            .filter(|&(_, id)| !self.disabled[id as usize])
            .collect();
        self.ranks = HashMap::with_capacity(self.merges.len());
        for (r, m) in self.merges.iter().enumerate() {
            if self.disabled[m.result as usize] {
                continue;
            }
            self.ranks.entry((m.left, m.right)).or_insert((r as u32, m.result));
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn byte_fallback(&self) -> bool {
        self.byte_fallback
    }

    pub fn split_digits(&self) -> bool {
        self.split_digits
    }

    pub fn character_coverage(&self) -> f64 {
        self.character_coverage
    }

    pub fn first_alphabet_id(&self) -> u32 {
        (SPECIAL_TOKENS.len() + if self.byte_fallback { BYTE_TOKENS } else { 0 }) as u32
    }

    pub fn alphabet(&self) -> Vec<char> {
        let first = self.first_alphabet_id() as usize;
        self.tokens[first..first + self.alphabet_len]
            .iter()
            .map(|t| t.chars().next().expect("alphabet token"))
            .collect()
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    /// Merges as token strings, in learned order.
    pub fn merge_table(&self) -> Vec<(String, String)> {
        self.merges
            .iter()
            .map(|m| (self.tokens[m.left as usize].clone(), self.tokens[m.right as usize].clone()))
            .collect()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn freq(&self, id: u32) -> u64 {
        self.freqs.get(id as usize).copied().unwrap_or(0)
    }

    pub fn is_byte_token(&self, id: u32) -> bool {
        self.byte_fallback && (SPECIAL_TOKENS.len() as u32..self.first_alphabet_id()).contains(&id)
    }

    /// Alphabet and merged tokens, excluding specials and byte tokens.
    pub fn pieces(&self) -> impl Iterator<Item = (u32, &str)> + '_ {
        let first = self.first_alphabet_id() as usize;
        self.tokens[first..]
            .iter()
            .enumerate()
            .map(move |(i, t)| ((first + i) as u32, t.as_str()))
    }

    pub fn is_disabled(&self, id: u32) -> bool {
        self.disabled.get(id as usize).copied().unwrap_or(false)
    }

    /// Pieces that are still reachable by encoding.
    pub fn enabled_pieces(&self) -> impl Iterator<Item = (u32, &str)> + '_ {
        self.pieces().filter(|(id, _)| !self.is_disabled(*id))
    }

    /// Stops the given pieces from being produced. Disabled alphabet
    /// characters encode as UNK (or bytes); merges yielding a disabled token
    /// are skipped.
    pub fn disable(&mut self, ids: impl IntoIterator<Item = u32>) {
        let first = self.first_alphabet_id();
        for id in ids {
            if id >= first && (id as usize) < self.disabled.len() {
                self.disabled[id as usize] = true;
            }
        }
        self.index();
    }

    pub(crate) fn char_id(&self, c: char) -> Option<u32> {
        self.char_ids.get(&c).copied()
    }

    /// Splits a marker-prefixed word into merge runs and atoms.
    pub(crate) fn pieces_of(&self, word: &str, with_marker: bool, out: &mut Vec<Piece>) {
        let mut run: Vec<u32> = Vec::new();
        if with_marker {
            run.push(MARKER_ID);
        }
        for c in word.chars() {
            match self.char_id(c) {
                Some(id) if !(self.split_digits && is_decimal_digit(c)) => run.push(id),
                _ => {
                    if !run.is_empty() {
                        out.push(Piece::Run(std::mem::take(&mut run)));
                    }
                    out.push(Piece::Atom(c));
                }
            }
        }
        if !run.is_empty() {
            out.push(Piece::Run(run));
        }
    }

    pub(crate) fn merge_run(&self, run: &mut Vec<u32>) {
        loop {
            let mut best: Option<(u32, usize, u32)> = None;
            for i in 0..run.len().saturating_sub(1) {
                if let Some(&(rank, result)) = self.ranks.get(&(run[i], run[i + 1])) {
                    if best.is_none_or(|(r, _, _)| rank < r) {
                        best = Some((rank, i, result));
                    }
                }
            }
            match best {
                Some((_, i, result)) => {
                    run[i] = result;
                    run.remove(i + 1);
                }
                None => break,
            }
        }
    }

    fn emit_atom(&self, c: char, out: &mut Vec<u32>) {
        if let Some(id) = self.char_id(c) {
            out.push(id);
        } else if self.byte_fallback {
            let mut buf = [0u8; 4];
            for b in c.encode_utf8(&mut buf).bytes() {
                out.push(SPECIAL_TOKENS.len() as u32 + b as u32);
            }
        } else {
            out.push(UNK_ID);
        }
    }

    /// Encodes text with a leading boundary marker. Spaces become markers;
    /// other whitespace and unknown characters become byte tokens or UNK.
    pub fn encode(&self, text: &str) -> Vec<u32> {
        let mut out = Vec::with_capacity(text.len() / 2 + 2);
        let mut pieces = Vec::new();
        for word in text.split(' ') {
            pieces.clear();
            self.pieces_of(word, true, &mut pieces);
            for p in pieces.drain(..) {
                match p {
                    Piece::Run(mut run) => {
                        self.merge_run(&mut run);
                        out.extend_from_slice(&run);
                    }
                    Piece::Atom(c) => self.emit_atom(c, &mut out),
                }
            }
        }
        out
    }

    /// Inverse of [`encode`](Self::encode). UNK decodes to U+FFFD; the
    /// other control tokens decode to nothing.
    pub fn decode(&self, ids: &[u32]) -> Result<String, TokenizerError> {
        let mut bytes: Vec<u8> = Vec::with_capacity(ids.len() * 3);
        let mut leading_marker = None;
        for &id in ids {
            let tok = self.tokens.get(id as usize).ok_or(TokenizerError::UnknownId(id))?;
            let from_marker = match id {
                UNK_ID => {
                    bytes.extend_from_slice("\u{FFFD}".as_bytes());
                    false
                }
                BOS_ID | EOS_ID | PAD_ID => continue,
                _ if self.is_byte_token(id) => {
                    bytes.push((id - SPECIAL_TOKENS.len() as u32) as u8);
                    false
                }
                _ => {
                    let mut buf = [0u8; 4];
                    for c in tok.chars() {
                        let c = if c == MARKER { ' ' } else { c };
                        bytes.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
                    }
                    tok.starts_with(MARKER)
                }
            };
            leading_marker.get_or_insert(from_marker);
        }
        let mut s = String::from_utf8_lossy(&bytes).into_owned();
        if leading_marker == Some(true) {
            s.remove(0);
        }
        Ok(s)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), TokenizerError> {
        w.write_all(MAGIC)?;
        w.write_u32::<LE>(FORMAT_VERSION)?;
        w.write_u8(self.byte_fallback as u8 | (self.split_digits as u8) << 1)?;
        w.write_f64::<LE>(self.character_coverage)?;
        let first = self.first_alphabet_id() as usize;
        w.write_u32::<LE>(self.alphabet_len as u32)?;
        for i in first..first + self.alphabet_len {
            let c = self.tokens[i].chars().next().expect("alphabet token");
            w.write_u32::<LE>(c as u32)?;
            w.write_u64::<LE>(self.freqs[i])?;
        }
        w.write_u32::<LE>(self.merges.len() as u32)?;
        for m in &self.merges {
            w.write_u32::<LE>(m.left)?;
            w.write_u32::<LE>(m.right)?;
            w.write_u32::<LE>(m.result)?;
            w.write_u64::<LE>(self.freqs[m.result as usize])?;
        }
        let disabled: Vec<u32> = (0..self.tokens.len() as u32).filter(|&i| self.disabled[i as usize]).collect();
        w.write_u32::<LE>(disabled.len() as u32)?;
        for id in disabled {
            w.write_u32::<LE>(id)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<TokenizerModel, TokenizerError> {
        let bad = |m: &str| TokenizerError::Format(m.to_string());
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(bad("not a tokenizer model"));
        }
        let version = r.read_u32::<LE>()?;
        if version != FORMAT_VERSION {
            return Err(TokenizerError::Format(format!("unsupported version {version}")));
        }
        let flags = r.read_u8()?;
        let coverage = r.read_f64::<LE>()?;
        let n_alpha = r.read_u32::<LE>()? as usize;
        let mut alphabet = Vec::with_capacity(n_alpha);
        for _ in 0..n_alpha {
            let c = char::from_u32(r.read_u32::<LE>()?).ok_or_else(|| bad("invalid alphabet character"))?;
            alphabet.push((c, r.read_u64::<LE>()?));
        }
        let byte_fallback = flags & 1 != 0;
        let mut next = (SPECIAL_TOKENS.len() + if byte_fallback { BYTE_TOKENS } else { 0 } + n_alpha) as u32;
        let mut strings: Vec<String> = Vec::new();
        let first = next - n_alpha as u32;
        let lookup = |id: u32, strings: &[String], alphabet: &[(char, u64)]| -> Result<String, TokenizerError> {
            if id == MARKER_ID {
                Ok(MARKER.to_string())
            } else if id >= first && id < first + alphabet.len() as u32 {
                Ok(alphabet[(id - first) as usize].0.to_string())
            } else if id >= first + alphabet.len() as u32 {
                strings
                    .get((id - first) as usize - alphabet.len())
                    .cloned()
                    .ok_or_else(|| TokenizerError::Format(format!("merge refers to undefined token {id}")))
            } else {
                Err(TokenizerError::Format(format!("merge refers to non-mergeable token {id}")))
            }
        };
        let n_merges = r.read_u32::<LE>()? as usize;
        let mut merges = Vec::with_capacity(n_merges);
        for _ in 0..n_merges {
            let m = Merge {
                left: r.read_u32::<LE>()?,
                right: r.read_u32::<LE>()?,
                result: r.read_u32::<LE>()?,
            };
            let freq = r.read_u64::<LE>()?;
            let s = lookup(m.left, &strings, &alphabet)? + &lookup(m.right, &strings, &alphabet)?;
            if m.result == next {
                strings.push(s.clone());
                next += 1;
            } else if m.result > next || m.result < first {
                return Err(bad("merge result out of order"));
            }
            merges.push((m, s, freq));
        }
        let mut model = TokenizerModel::from_parts(alphabet, merges, byte_fallback, flags & 2 != 0, coverage);
        let n_disabled = r.read_u32::<LE>()? as usize;
        let mut disabled = Vec::with_capacity(n_disabled);
        for _ in 0..n_disabled {
            disabled.push(r.read_u32::<LE>()?);
        }
        model.disable(disabled);
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), TokenizerError> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<TokenizerModel, TokenizerError> {
        TokenizerModel::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    /// `token<TAB>id<TAB>freq` per line.
    pub fn write_vocab<W: Write>(&self, mut w: W) -> Result<(), TokenizerError> {
        for (id, t) in self.tokens.iter().enumerate() {
            writeln!(w, "{t}\t{id}\t{}", self.freqs[id])?;
        }
        Ok(())
    }
}
