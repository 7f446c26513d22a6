//! Login against a static user table and bearer session tokens.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use uuid::Uuid;

#[derive(Debug, Default)]
pub struct Sessions {
    users: BTreeMap<String, String>,
    tokens: Mutex<HashMap<String, String>>,
}

fn same(a: &str, b: &str) -> bool {
    // Compare every byte so the time taken does not depend on where the
    // first mismatch is.
    a.len() == b.len() && a.bytes().zip(b.bytes()).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

impl Sessions {
    pub fn new(users: BTreeMap<String, String>) -> Self {
        Self {
            users,
            tokens: Mutex::new(HashMap::new()),
        }
    }

    /// A fresh token for valid credentials.
    pub fn login(&self, user: &str, password: &str) -> Option<String> {
        let expected = self.users.get(user)?;
        if !same(expected, password) {
            return None;
        }
        let token = Uuid::new_v4().simple().to_string();
        self.tokens
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(token.clone(), user.to_string());
        Some(token)
    }

    /// The user a token belongs to.
    pub fn user(&self, token: &str) -> Option<String> {
        self.tokens.lock().unwrap_or_else(|e| e.into_inner()).get(token).cloned()
    }

    pub fn logout(&self, token: &str) -> bool {
        self.tokens.lock().unwrap_or_else(|e| e.into_inner()).remove(token).is_some()
    }
}
