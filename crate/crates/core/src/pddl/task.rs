/// A grounded STRIPS action over fact indexes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundAction {
    pub schema: String,
    pub args: Vec<String>,
    pub pre: Vec<usize>,
    pub add: Vec<usize>,
    pub del: Vec<usize>,
}

impl GroundAction {
    pub fn new(schema: &str, args: &[&str], pre: &[usize], add: &[usize], del: &[usize]) -> Self {
        let sorted = |v: &[usize]| {
            let mut v = v.to_vec();
            v.sort_unstable();
            v.dedup();
            v
        };
        GroundAction {
            schema: schema.to_string(),
            args: args.iter().map(|a| a.to_string()).collect(),
            pre: sorted(pre),
            add: sorted(add),
            del: sorted(del),
        }
    }

    /// `(name arg ...)`
    pub fn label(&self) -> String {
        let mut s = format!("({}", self.schema);
        for a in &self.args {
            s.push(' ');
            s.push_str(a);
        }
        s.push(')');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TaskError {
    #[error("action {action} refers to fact {fact} outside a universe of {universe}")]
    FactOutOfRange { action: usize, fact: usize, universe: usize },
    #[error("init or goal refers to fact {0} outside the universe")]
    StateOutOfRange(usize),
}

/// Dense bit set over fact indexes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct FactSet {
    words: Vec<u64>,
}

impl FactSet {
    pub fn with_capacity(n: usize) -> Self {
        FactSet {
            words: vec![0; n.div_ceil(64)],
        }
    }

    pub fn from_indexes(n: usize, idx: &[usize]) -> Self {
        let mut s = Self::with_capacity(n);
        for &i in idx {
            s.insert(i);
        }
        s
    }

    pub fn contains(&self, i: usize) -> bool {
        self.words.get(i / 64).is_some_and(|w| w & (1 << (i % 64)) != 0)
    }

    pub fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn remove(&mut self, i: usize) {
        self.words[i / 64] &= !(1 << (i % 64));
    }

    pub fn contains_all(&self, idx: &[usize]) -> bool {
        idx.iter().all(|&i| self.contains(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(w, &bits)| {
            (0..64).filter(move |b| bits & (1 << b) != 0).map(move |b| w * 64 + b)
        })
    }
}

/// A grounded planning task with an indexed, sorted fact universe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundedPlanningTask {
    pub facts: Vec<String>,
    pub actions: Vec<GroundAction>,
    pub init: Vec<usize>,
    pub goal: Vec<usize>,
}

impl GroundedPlanningTask {
    pub fn new(
        facts: Vec<String>,
        actions: Vec<GroundAction>,
        init: Vec<usize>,
        goal: Vec<usize>,
    ) -> Result<Self, TaskError> {
        let n = facts.len();
        for (ai, a) in actions.iter().enumerate() {
            if let Some(&f) = a.pre.iter().chain(&a.add).chain(&a.del).find(|&&f| f >= n) {
                return Err(TaskError::FactOutOfRange {
                    action: ai,
                    fact: f,
                    universe: n,
                });
            }
        }
        if let Some(&f) = init.iter().chain(&goal).find(|&&f| f >= n) {
            return Err(TaskError::StateOutOfRange(f));
        }
        let mut init = init;
        init.sort_unstable();
        init.dedup();
        let mut goal = goal;
        goal.sort_unstable();
        goal.dedup();
        Ok(GroundedPlanningTask {
            facts,
            actions,
            init,
            goal,
        })
    }

    pub fn initial_state(&self) -> FactSet {
        FactSet::from_indexes(self.facts.len(), &self.init)
    }

    pub fn is_goal(&self, state: &FactSet) -> bool {
        state.contains_all(&self.goal)
    }

    pub fn applicable(&self, state: &FactSet, action: usize) -> bool {
        state.contains_all(&self.actions[action].pre)
    }

    /// Deletes first, then adds.
    pub fn apply(&self, state: &FactSet, action: usize) -> FactSet {
        let a = &self.actions[action];
        let mut next = state.clone();
        for &d in &a.del {
            next.remove(d);
        }
        for &p in &a.add {
            next.insert(p);
        }
        next
    }

    pub fn find_action(&self, label: &str) -> Option<usize> {
        self.actions.iter().position(|a| a.label() == label)
    }
}

/// A sequence of action indexes into a task.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Plan {
    pub steps: Vec<usize>,
}

impl Plan {
    pub fn new(steps: Vec<usize>) -> Self {
        Plan { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// One `(name arg ...)` per line.
    pub fn to_text(&self, task: &GroundedPlanningTask) -> String {
        self.steps.iter().map(|&i| task.actions[i].label() + "\n").collect()
    }

    /// Inverse of [`Plan::to_text`]. The error is the first unknown line.
    pub fn parse(text: &str, task: &GroundedPlanningTask) -> Result<Plan, String> {
        let mut steps = Vec::new();
        for line in text.lines() {
            let line = line.split(';').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let norm = line.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
            steps.push(task.find_action(&norm).ok_or_else(|| line.to_string())?);
        }
        Ok(Plan { steps })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanValidation {
    pub valid: bool,
    /// Index of the first step whose preconditions fail, or `plan.len()`
    /// when every step applies but the goal does not hold.
    pub first_violation: Option<usize>,
}

pub fn validate_plan(plan: &Plan, task: &GroundedPlanningTask) -> PlanValidation {
    let mut state = task.initial_state();
    for (i, &a) in plan.steps.iter().enumerate() {
        if a >= task.actions.len() || !task.applicable(&state, a) {
            return PlanValidation {
                valid: false,
                first_violation: Some(i),
            };
        }
        state = task.apply(&state, a);
    }
    if task.is_goal(&state) {
        PlanValidation {
            valid: true,
            first_violation: None,
        }
    } else {
        PlanValidation {
            valid: false,
            first_violation: Some(plan.len()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn chain() -> GroundedPlanningTask {
        let facts = vec!["a".into(), "b".into(), "c".into(), "s".into()];
        let actions = vec![
            GroundAction::new("ab", &[], &[0], &[1], &[]),
            GroundAction::new("bc", &[], &[1], &[2], &[]),
            GroundAction::new("sa", &[], &[3], &[0], &[]),
        ];
        GroundedPlanningTask::new(facts, actions, vec![3], vec![2]).unwrap()
    }

    #[test]
    fn swapped_steps_fail_at_the_broken_step() {
        let t = chain();
        assert!(validate_plan(&Plan::new(vec![2, 0, 1]), &t).valid);
        let v = validate_plan(&Plan::new(vec![2, 1, 0]), &t);
        assert_eq!(v.first_violation, Some(1));
        let v = validate_plan(&Plan::new(vec![2, 0]), &t);
        assert_eq!(v.first_violation, Some(2));
    }

    #[test]
    fn empty_plan_when_goal_holds() {
        let mut t = chain();
        t.goal = vec![3];
        assert!(validate_plan(&Plan::default(), &t).valid);
    }

    #[test]
    fn plan_text_round_trip() {
        let t = chain();
        let p = Plan::new(vec![2, 0, 1]);
        assert_eq!(p.to_text(&t), "(sa)\n(ab)\n(bc)\n");
        assert_eq!(Plan::parse(&p.to_text(&t), &t).unwrap(), p);
    }

    #[test]
    fn out_of_range_facts_are_rejected() {
        let bad = GroundedPlanningTask::new(vec!["a".into()], vec![GroundAction::new("x", &[], &[1], &[], &[])], vec![], vec![]);
        assert!(matches!(bad, Err(TaskError::FactOutOfRange { fact: 1, .. })));
    }
}
