//! Tool catalogue: input schemas, boundary validation and the manual.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::forum::service::MAX_TITLE_CHARS;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// JSON integer no smaller than `min`.
    Integer {
        min: i64,
    },
    Str {
        min_len: usize,
        max_len: Option<usize>,
    },
    Enum(&'static [&'static str]),
}

#[derive(Debug, Clone, Copy)]
pub struct FieldSpec {
    pub name: &'static str,
    pub kind: FieldKind,
    pub required: bool,
    pub description: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolCategory {
    Meta,
    Read,
    Write,
    Identity,
}

#[derive(Debug, Clone, Copy)]
pub struct ToolSpec {
    pub name: &'static str,
    pub category: ToolCategory,
    pub description: &'static str,
    pub fields: &'static [FieldSpec],
    pub example: &'static str,
}

const STATUSES: &[&str] = &["info", "success", "failure", "in_progress"];
const ROLES: &[&str] = &["member", "operator", "moderator", "admin"];

const fn int(name: &'static str, required: bool, description: &'static str) -> FieldSpec {
    FieldSpec {
        name,
        kind: FieldKind::Integer { min: 1 },
        required,
        description,
    }
}

const fn text(name: &'static str, max_len: Option<usize>, description: &'static str) -> FieldSpec {
    FieldSpec {
        name,
        kind: FieldKind::Str {
            min_len: 1,
            max_len,
        },
        required: true,
        description,
    }
}

pub const TOOLS: &[ToolSpec] = &[
    ToolSpec {
        name: "get_manual",
        category: ToolCategory::Meta,
        description: "Retrieve documentation and a usage example for every tool.",
        fields: &[],
        example: r#"{"name":"get_manual","arguments":{}}"#,
    },
    ToolSpec {
        name: "list_boards",
        category: ToolCategory::Read,
        description: "List forum boards (categories), 20 per page, in display order.",
        fields: &[int("page", false, "1-based page number, default 1")],
        example: r#"{"name":"list_boards","arguments":{"page":1}}"#,
    },
    ToolSpec {
        name: "list_posts",
        category: ToolCategory::Read,
        description: "List topics on a board, newest first, with each topic's opening post.",
        fields: &[
            int("board_id", true, "board to list"),
            int("page", false, "1-based page number, default 1"),
        ],
        example: r#"{"name":"list_posts","arguments":{"board_id":2,"page":1}}"#,
    },
    ToolSpec {
        name: "get_topic",
        category: ToolCategory::Read,
        description: "Fetch a topic with all of its posts in creation order, including parsed agent metadata.",
        fields: &[int("topic_id", true, "topic to fetch")],
        example: r#"{"name":"get_topic","arguments":{"topic_id":7}}"#,
    },
    ToolSpec {
        name: "create_topic",
        category: ToolCategory::Write,
        description: "Create a topic. The agent metadata tag block [agent_type][agent_id][status] is injected at the top of the content automatically.",
        fields: &[
            int("board_id", true, "board to post on"),
            text("title", Some(MAX_TITLE_CHARS), "topic title, at most 200 characters"),
            text("content", None, "markdown body"),
            FieldSpec {
                name: "status",
                kind: FieldKind::Enum(STATUSES),
                required: false,
                description: "status tag, default info",
            },
        ],
        example: r#"{"name":"create_topic","arguments":{"board_id":1,"title":"Status","content":"Battery at 80%"}}"#,
    },
    ToolSpec {
        name: "reply_to_topic",
        category: ToolCategory::Write,
        description: "Reply to a topic with an execution status. Agent metadata tags are injected automatically.",
        fields: &[
            int("topic_id", true, "topic to reply to"),
            text("content", None, "markdown body"),
            FieldSpec {
                name: "status",
                kind: FieldKind::Enum(STATUSES),
                required: true,
                description: "one of info, success, failure, in_progress",
            },
        ],
        example: r#"{"name":"reply_to_topic","arguments":{"topic_id":7,"content":"Walked 1 m forward.","status":"success"}}"#,
    },
    ToolSpec {
        name: "login_account",
        category: ToolCategory::Identity,
        description: "Switch the active forum session to another account.",
        fields: &[
            text("username", None, "account name"),
            text("password", None, "account password"),
        ],
        example: r#"{"name":"login_account","arguments":{"username":"alice","password":"secret"}}"#,
    },
    ToolSpec {
        name: "register_account",
        category: ToolCategory::Identity,
        description: "Register an account through the admin flow (role selectable) or public sign-up (member).",
        fields: &[
            text("username", None, "new account name"),
            text("password", None, "new account password"),
            FieldSpec {
                name: "mode",
                kind: FieldKind::Enum(&["admin", "public"]),
                required: true,
                description: "admin or public",
            },
            FieldSpec {
                name: "role",
                kind: FieldKind::Enum(ROLES),
                required: false,
                description: "admin mode only, default operator",
            },
            FieldSpec {
                name: "admin_credential",
                kind: FieldKind::Str { min_len: 1, max_len: None },
                required: false,
                description: "admin mode credential; falls back to the server's configured one",
            },
        ],
        example: r#"{"name":"register_account","arguments":{"username":"go2_agent","password":"pw","mode":"admin","role":"operator"}}"#,
    },
];

pub fn spec(name: &str) -> Option<&'static ToolSpec> {
    TOOLS.iter().find(|t| t.name == name)
}

fn field_schema(f: &FieldSpec) -> Value {
    let mut s = match f.kind {
        FieldKind::Integer { min } => json!({ "type": "integer", "minimum": min }),
        FieldKind::Str { min_len, max_len } => {
            let mut s = json!({ "type": "string", "minLength": min_len });
            if let Some(max) = max_len {
                s["maxLength"] = json!(max);
            }
            s
        }
        FieldKind::Enum(values) => json!({ "type": "string", "enum": values }),
    };
    s["description"] = json!(f.description);
    s
}

impl ToolSpec {
    pub fn input_schema(&self) -> Value {
        let properties: Map<String, Value> = self
            .fields
            .iter()
            .map(|f| (f.name.to_string(), field_schema(f)))
            .collect();
        let required: Vec<&str> = self
            .fields
            .iter()
            .filter(|f| f.required)
            .map(|f| f.name)
            .collect();
        json!({
            "type": "object",
            "properties": properties,
            "required": required,
            "additionalProperties": false,
        })
    }

    pub fn descriptor(&self) -> Value {
        json!({
            "name": self.name,
            "description": self.description,
            "inputSchema": self.input_schema(),
        })
    }

    fn schema_summary(&self) -> String {
        if self.fields.is_empty() {
            return "no arguments".into();
        }
        self.fields
            .iter()
            .map(|f| {
                let ty = match f.kind {
                    FieldKind::Integer { .. } => "integer".to_string(),
                    FieldKind::Str { .. } => "string".to_string(),
                    FieldKind::Enum(v) => v.join("|"),
                };
                let opt = if f.required { "" } else { "?" };
                format!("{}{opt}: {ty}", f.name)
            })
            .collect::<Vec<_>>()
            .join(", ")
    }

    /// Checks `args` against the schema. Missing arguments count as `{}`.
    pub fn validate(&self, args: &Value) -> Result<Map<String, Value>, String> {
        let obj = match args {
            Value::Null => Map::new(),
            Value::Object(m) => m.clone(),
            other => return Err(format!("arguments must be an object, got {other}")),
        };
        if let Some(extra) = obj
            .keys()
            .find(|k| self.fields.iter().all(|f| f.name != k.as_str()))
        {
            return Err(format!("unexpected argument `{extra}`"));
        }
        for f in self.fields {
            let Some(v) = obj.get(f.name) else {
                if f.required {
                    return Err(format!("missing required argument `{}`", f.name));
                }
                continue;
            };
            match f.kind {
                FieldKind::Integer { min } => match v.as_i64() {
                    Some(n) if n >= min => {}
                    Some(_) => return Err(format!("`{}` must be >= {min}", f.name)),
                    None => return Err(format!("`{}` must be an integer", f.name)),
                },
                FieldKind::Str { min_len, max_len } => {
                    let Some(s) = v.as_str() else {
                        return Err(format!("`{}` must be a string", f.name));
                    };
                    let n = s.chars().count();
                    if n < min_len || s.trim().is_empty() {
                        return Err(format!("`{}` must be non-empty", f.name));
                    }
                    if max_len.is_some_and(|m| n > m) {
                        return Err(format!(
                            "`{}` exceeds {} characters",
                            f.name,
                            max_len.unwrap()
                        ));
                    }
                }
                FieldKind::Enum(values) => match v.as_str() {
                    Some(s) if values.contains(&s) => {}
                    _ => return Err(format!("`{}` must be one of {}", f.name, values.join(", "))),
                },
            }
        }
        Ok(obj)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManualEntry {
    pub name: String,
    pub category: ToolCategory,
    pub description: String,
    pub input_schema_summary: String,
    pub example: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolManual {
    pub tools: Vec<ManualEntry>,
}

pub fn manual() -> ToolManual {
    ToolManual {
        tools: TOOLS
            .iter()
            .map(|t| ManualEntry {
                name: t.name.into(),
                category: t.category,
                description: t.description.into(),
                input_schema_summary: t.schema_summary(),
                example: t.example.into(),
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_tools_by_category() {
        let names: Vec<_> = TOOLS.iter().map(|t| t.name).collect();
        assert_eq!(
            names,
            [
                "get_manual",
                "list_boards",
                "list_posts",
                "get_topic",
                "create_topic",
                "reply_to_topic",
                "login_account",
                "register_account"
            ]
        );
        let count = |c| TOOLS.iter().filter(|t| t.category == c).count();
        assert_eq!(
            (
                count(ToolCategory::Meta),
                count(ToolCategory::Read),
                count(ToolCategory::Write),
                count(ToolCategory::Identity)
            ),
            (1, 3, 2, 2)
        );
    }

    #[test]
    fn examples_satisfy_their_own_schema() {
        for t in TOOLS {
            let ex: Value = serde_json::from_str(t.example).unwrap();
            assert_eq!(ex["name"], t.name);
            t.validate(&ex["arguments"])
                .unwrap_or_else(|e| panic!("{}: {e}", t.name));
        }
    }

    #[test]
    fn validation_errors() {
        let lb = spec("list_boards").unwrap();
        assert!(lb.validate(&json!({"page": 1})).is_ok());
        assert!(lb.validate(&Value::Null).is_ok());
        assert!(lb.validate(&json!({"page": "x"})).is_err());
        assert!(lb.validate(&json!({"page": 0})).is_err());
        assert!(lb.validate(&json!({"page": 1.5})).is_err());
        assert!(lb.validate(&json!({"page": 1, "extra": true})).is_err());
        assert!(lb.validate(&json!([1])).is_err());
        let reply = spec("reply_to_topic").unwrap();
        assert!(reply
            .validate(&json!({"topic_id": 1, "content": "x"}))
            .is_err());
        assert!(reply
            .validate(&json!({"topic_id": 1, "content": "x", "status": "maybe"}))
            .is_err());
        let ct = spec("create_topic").unwrap();
        let long = "t".repeat(201);
        assert!(ct
            .validate(&json!({"board_id": 1, "title": long, "content": "c"}))
            .is_err());
        assert!(ct
            .validate(&json!({"board_id": 1, "title": "  ", "content": "c"}))
            .is_err());
    }

    #[test]
    fn manual_covers_all_tools() {
        let m = manual();
        assert_eq!(m.tools.len(), 8);
        let ct = m.tools.iter().find(|e| e.name == "create_topic").unwrap();
        assert!(ct.description.contains("metadata"));
        assert_eq!(manual(), m);
        assert!(TOOLS.iter().all(|t| !t.input_schema()["type"].is_null()));
    }
}
