//! Small hand-built tasks shared by unit tests, integration tests and docs.

use crate::task::{PlanningTask, TaskBuilder};

pub const CHAIN3_DOMAIN: &str = "
(define (domain chain)
  (:requirements :strips)
  (:predicates (p0) (p1) (p2) (gl))
  (:action a1 :parameters () :precondition (p0) :effect (and (p1) (not (p0))))
  (:action a2 :parameters () :precondition (p1) :effect (and (p2) (not (p1))))
  (:action a3 :parameters () :precondition (p2) :effect (and (gl) (not (p2)))))
";

pub const CHAIN3_PROBLEM: &str = "
(define (problem chain3)
  (:domain chain)
  (:init (p0))
  (:goal (and (gl))))
";

pub const GRIPPER1_DOMAIN: &str = "
(define (domain gripper-typed)
  (:requirements :strips :typing :equality)
  (:types room ball gripper)
  (:predicates (at-robby ?r - room)
               (at ?b - ball ?r - room)
               (free ?g - gripper)
               (carry ?b - ball ?g - gripper))
  (:action move
    :parameters (?from ?to - room)
    :precondition (and (at-robby ?from) (not (= ?from ?to)))
    :effect (and (at-robby ?to) (not (at-robby ?from))))
  (:action pick
    :parameters (?obj - ball ?room - room ?gripper - gripper)
    :precondition (and (at ?obj ?room) (at-robby ?room) (free ?gripper))
    :effect (and (carry ?obj ?gripper) (not (at ?obj ?room)) (not (free ?gripper))))
  (:action drop
    :parameters (?obj - ball ?room - room ?gripper - gripper)
    :precondition (and (carry ?obj ?gripper) (at-robby ?room))
    :effect (and (at ?obj ?room) (free ?gripper) (not (carry ?obj ?gripper)))))
";

pub const GRIPPER1_PROBLEM: &str = "
(define (problem gripper-1)
  (:domain gripper-typed)
  (:objects rooma roomb - room ball1 - ball left right - gripper)
  (:init (at-robby rooma) (free left) (free right) (at ball1 rooma))
  (:goal (and (at ball1 roomb))))
";

/// `p0 -a1-> p1 -a2-> p2 -a3-> gl`, each action deleting its precondition.
pub fn chain3() -> PlanningTask {
    TaskBuilder::new("chain3")
        .facts(&["p0", "p1", "p2", "gl"])
        .action("a1", &["p0"], &["p1"], &["p0"])
        .action("a2", &["p1"], &["p2"], &["p1"])
        .action("a3", &["p2"], &["gl"], &["p2"])
        .init(&["p0"])
        .goal(&["gl"])
        .build()
        .expect("chain3 fixture")
}

/// From `s0`, action `a` leads to `s1` and then `c` to the goal `s2`;
/// action `b` leads to the dead end `s3`.
pub fn fork() -> PlanningTask {
    TaskBuilder::new("fork")
        .facts(&["s0", "s1", "s2", "s3"])
        .action("a", &["s0"], &["s1"], &["s0"])
        .action("b", &["s0"], &["s3"], &["s0"])
        .action("c", &["s1"], &["s2"], &["s1"])
        .init(&["s0"])
        .goal(&["s2"])
        .build()
        .expect("fork fixture")
}

/// Goal `g` has two achievers `x` and `y` with identical preconditions.
pub fn two_achievers() -> PlanningTask {
    TaskBuilder::new("two-achievers")
        .facts(&["s", "g"])
        .action("x", &["s"], &["g"], &[])
        .action("y", &["s"], &["g"], &[])
        .init(&["s"])
        .goal(&["g"])
        .build()
        .expect("two-achievers fixture")
}

/// Six-state line `at0 .. at5` with goal `{at0, at5}`: relaxed-solvable,
/// unsolvable for real.
pub fn line_unreachable() -> PlanningTask {
    let names: Vec<String> = (0..6).map(|i| format!("at{i}")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut b = TaskBuilder::new("line-unreachable").facts(&refs);
    for i in 0..5 {
        b = b.action(&format!("right{i}"), &[refs[i]], &[refs[i + 1]], &[refs[i]]);
    }
    b.init(&["at0"])
        .goal(&["at0", "at5"])
        .build()
        .expect("line fixture")
}

/// Non-goal fact `x` is only produced by `ag`, the achiever of goal `g`.
pub fn shared_achiever() -> PlanningTask {
    TaskBuilder::new("shared-achiever")
        .facts(&["i", "g", "x", "y", "z"])
        .action("ag", &["i"], &["g", "x"], &[])
        .action("ay", &["i"], &["y"], &[])
        .action("az", &["y"], &["z"], &[])
        .init(&["i"])
        .goal(&["g"])
        .build()
        .expect("shared-achiever fixture")
}
