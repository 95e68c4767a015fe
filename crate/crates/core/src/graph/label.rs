use std::collections::HashMap;
use std::fmt;

/// A node label, as a token id into an [`Alphabet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label(pub u32);

impl Label {
    /// Reserved token for the constant coordinate of the inhomogeneous
    /// polynomial kernel. Never handed out by an alphabet.
    pub const BIAS: Label = Label(u32::MAX);

    pub fn id(self) -> u32 {
        self.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == Label::BIAS {
            f.write_str("<bias>")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// Bidirectional map between raw label strings and dense label ids.
///
/// Ids are handed out in order of first interning, so parsing the same file
/// twice yields the same ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Alphabet {
    names: Vec<String>,
    ids: HashMap<String, Label>,
}

impl Alphabet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the id of `name`, adding it if unseen.
    pub fn intern(&mut self, name: &str) -> Label {
        if let Some(&label) = self.ids.get(name) {
            return label;
        }
        let id = u32::try_from(self.names.len())
            .ok()
            .filter(|&id| id != Label::BIAS.0)
            .expect("label alphabet exhausted");
        let label = Label(id);
        self.names.push(name.to_owned());
        self.ids.insert(name.to_owned(), label);
        label
    }

    pub fn get(&self, name: &str) -> Option<Label> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, label: Label) -> Option<&str> {
        self.names.get(label.0 as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Label, &str)> {
        self.names
            .iter()
            .enumerate()
            .map(|(i, name)| (Label(i as u32), name.as_str()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_dense_and_stable() {
        let mut alphabet = Alphabet::new();
        let a = alphabet.intern("A");
        let b = alphabet.intern("B");
        assert_eq!(alphabet.intern("A"), a);
        assert_eq!((a, b), (Label(0), Label(1)));
        assert_eq!(alphabet.name(b), Some("B"));
        assert_eq!(alphabet.get("C"), None);
        assert_eq!(alphabet.len(), 2);
    }

    #[test]
    fn bias_is_never_an_alphabet_id() {
        let mut alphabet = Alphabet::new();
        for i in 0..100 {
            assert_ne!(alphabet.intern(&i.to_string()), Label::BIAS);
        }
        assert_eq!(alphabet.name(Label::BIAS), None);
    }
}
