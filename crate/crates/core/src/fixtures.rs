//! Worked example plans used by `seed-demo` and the test suites.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clock::Timestamp;
use crate::plan::{PlanError, Project, SectionKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fixture {
    #[default]
    LunchPlanner,
    Translator,
}

impl FromStr for Fixture {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "lunch" | "lunch_planner" => Ok(Fixture::LunchPlanner),
            "translator" => Ok(Fixture::Translator),
            other => Err(format!("unknown fixture `{other}` (expected lunch-planner or translator)")),
        }
    }
}

pub struct FixtureText {
    pub title: &'static str,
    pub define: &'static str,
    pub design: &'static str,
    pub positive: &'static str,
    pub negative: &'static str,
}

pub const LUNCH_PLANNER: FixtureText = FixtureText {
    title: "LunchPal",
    define: "Students waste time deciding what to eat at school during lunchtime because menus change daily. \
             Many students skip lunch or pick food they do not like because they cannot see the menu ahead of time.",
    design: "The home screen shows a list of today's lunch menu items so students can plan their meal. \
             Add a button to mark favorite dishes and a notification that reminds students when a favorite is served. \
             A chart shows menu trends over the week so students can decide ahead of time.",
    positive: "Students will save time at lunch and eat healthier meals because they can plan ahead. \
               Cafeteria staff can also see which dishes students like and waste less food.",
    negative: "Students might spend too much screen time checking the menu during class, which could be a distraction. \
               The app could also collect data about what each student eats, which is a privacy risk for students.",
};

pub const TRANSLATOR: FixtureText = FixtureText {
    title: "English Helper",
    define: "My mother is learning English and struggles to read signs and messages when she is at the store or at work during the day. \
             I want to help parents like her who are new to English understand words quickly.",
    design: "The app has a text box and a button, where the mother can type in their language and press the button to see the English-translated version. \
             A list view saves recent translations so she can practice the new words later.",
    positive: "My mother and other parents can learn English faster and feel more confident when they talk with teachers at school.",
    negative: "Parents may rely on the translator too much and stop practicing, and wrong translations could cause confusion. \
               Typed messages are private data, so the app should not share them, to protect the privacy of parents.",
};

impl Fixture {
    pub fn text(self) -> &'static FixtureText {
        match self {
            Fixture::LunchPlanner => &LUNCH_PLANNER,
            Fixture::Translator => &TRANSLATOR,
        }
    }

    /// The filled-in project, one section update per box.
    pub fn project(self, id: impl Into<String>, now: Timestamp) -> Result<Project, PlanError> {
        let t = self.text();
        let mut p = Project::new(id, t.title, now)?;
        for (kind, text) in self.sections() {
            p = p.update_section(kind, text, now)?;
        }
        Ok(p)
    }

    pub fn sections(self) -> [(SectionKind, &'static str); 4] {
        let t = self.text();
        [
            (SectionKind::Define, t.define),
            (SectionKind::Design, t.design),
            (SectionKind::PositiveImpact, t.positive),
            (SectionKind::NegativeImpact, t.negative),
        ]
    }
}
