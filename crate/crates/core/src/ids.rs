use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! string_id {
    ($name:ident, $prefix:literal) => {
        #[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub(crate) fn from_seq(seq: u64) -> Self {
                Self(format!(concat!($prefix, "{:08}"), seq))
            }

            /// Numeric suffix for ids minted by this crate; foreign ids yield `None`.
            pub(crate) fn seq(&self) -> Option<u64> {
                self.0.strip_prefix($prefix)?.parse().ok()
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

string_id!(NodeId, "n");
string_id!(EdgeId, "e");
string_id!(GroupId, "g");

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minted_ids_sort_numerically() {
        let a = EdgeId::from_seq(9);
        let b = EdgeId::from_seq(10);
        assert!(a < b);
        assert_eq!(b.seq(), Some(10));
        assert_eq!(NodeId::from("external-7").seq(), None);
    }
}
