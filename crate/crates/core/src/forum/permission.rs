use serde::{Deserialize, Serialize};

use super::model::{BoardPolicy, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Read,
    PostCommand,
    PostReply,
    Admin,
}

/// Whether `role` may perform `action` on a board with `policy`.
///
/// Reading is always allowed. On operator-only boards both new topics and
/// replies need at least the operator role.
pub fn check_permission(role: Role, action: Action, policy: BoardPolicy) -> bool {
    match action {
        Action::Read => true,
        Action::Admin => role == Role::Admin,
        Action::PostCommand | Action::PostReply => match policy {
            BoardPolicy::Open => true,
            BoardPolicy::OperatorOnly => role.at_least(Role::Operator),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ROLES: [Role; 4] = [Role::Member, Role::Operator, Role::Moderator, Role::Admin];

    #[test]
    fn read_always_allowed() {
        for role in ROLES {
            for policy in [BoardPolicy::Open, BoardPolicy::OperatorOnly] {
                assert!(check_permission(role, Action::Read, policy));
            }
        }
    }

    #[test]
    fn command_board_needs_operator() {
        assert!(check_permission(
            Role::Operator,
            Action::PostCommand,
            BoardPolicy::OperatorOnly
        ));
        assert!(!check_permission(
            Role::Member,
            Action::PostCommand,
            BoardPolicy::OperatorOnly
        ));
        assert!(!check_permission(
            Role::Member,
            Action::PostReply,
            BoardPolicy::OperatorOnly
        ));
        assert!(check_permission(
            Role::Member,
            Action::PostCommand,
            BoardPolicy::Open
        ));
    }

    #[test]
    fn admin_only_for_admins() {
        assert!(check_permission(
            Role::Admin,
            Action::Admin,
            BoardPolicy::Open
        ));
        assert!(!check_permission(
            Role::Moderator,
            Action::Admin,
            BoardPolicy::Open
        ));
    }
}
