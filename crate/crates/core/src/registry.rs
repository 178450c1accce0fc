//! Name-keyed registries for interchangeable strategies.
//!
//! Every family of swappable algorithms (memory backends, place matchers,
//! optimizers, egomotion noise) is a trait; concrete variants are
//! registered under a stable name and built at runtime from a JSON
//! parameter object, so configs and the CLI select them by string.

use std::collections::BTreeMap;

use serde_json::Value;

use crate::error::{EsmError, Result};

pub type Factory<T> = fn(&Value) -> Result<Box<T>>;

pub struct Registry<T: ?Sized> {
    kind: &'static str,
    factories: BTreeMap<&'static str, Factory<T>>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            factories: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &'static str, factory: Factory<T>) -> &mut Self {
        self.factories.insert(name, factory);
        self
    }

    pub fn with(mut self, name: &'static str, factory: Factory<T>) -> Self {
        self.register(name, factory);
        self
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.factories.keys().copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn build(&self, name: &str, params: &Value) -> Result<Box<T>> {
        match self.factories.get(name) {
            Some(factory) => factory(params),
            None => Err(EsmError::UnknownStrategy {
                kind: self.kind,
                name: name.to_string(),
                available: self.names().collect::<Vec<_>>().join(", "),
            }),
        }
    }
}

/// Read an optional numeric field from a strategy parameter object.
pub(crate) fn param_f64(params: &Value, key: &str, default: f64) -> Result<f64> {
    match params.get(key) {
        None | Some(Value::Null) => Ok(default),
        Some(v) => v
            .as_f64()
            .ok_or_else(|| EsmError::Config(format!("parameter '{key}' must be a number"))),
    }
}

pub(crate) fn param_u64(params: &Value, key: &str, default: u64) -> Result<u64> {
    match params.get(key) {
        None | Some(Value::Null) => Ok(default),
        Some(v) => v.as_u64().ok_or_else(|| {
            EsmError::Config(format!("parameter '{key}' must be a non-negative integer"))
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    trait Greeter {
        fn greet(&self) -> String;
    }

    struct Hello(f64);

    impl Greeter for Hello {
        fn greet(&self) -> String {
            format!("hello {}", self.0)
        }
    }

    fn hello(params: &Value) -> Result<Box<dyn Greeter>> {
        Ok(Box::new(Hello(param_f64(params, "x", 1.0)?)))
    }

    #[test]
    fn builds_registered_and_rejects_unknown() {
        let reg = Registry::<dyn Greeter>::new("greeter").with("hello", hello);
        let g = reg.build("hello", &serde_json::json!({"x": 2.5})).unwrap();
        assert_eq!(g.greet(), "hello 2.5");
        let err = reg.build("nope", &Value::Null).err().unwrap();
        assert!(err.to_string().contains("available: hello"));
    }

    #[test]
    fn bad_param_type_is_config_error() {
        let reg = Registry::<dyn Greeter>::new("greeter").with("hello", hello);
        let err = reg.build("hello", &serde_json::json!({"x": "a"})).err().unwrap();
        assert!(matches!(err, EsmError::Config(_)));
    }
}
