use serde::{Deserialize, Serialize};

use super::{Domain, IndustryClass, IndustryMapping, SurveyComment};

/// Domain and industry criteria; `None` means "any".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Segment {
    pub domain: Option<Domain>,
    pub industry: Option<IndustryClass>,
}

impl Segment {
    pub fn matches(&self, comment: &SurveyComment, mapping: &IndustryMapping) -> bool {
        if self.domain.is_some_and(|d| d != comment.domain) {
            return false;
        }
        match self.industry {
            None => true,
            Some(wanted) => {
                let class = mapping.classify_lenient(&comment.industry_raw);
                class != IndustryClass::Unmapped && class == wanted
            }
        }
    }
}

/// Keeps the comments matching every criterion in `segment`, in input order.
/// Unmapped industries never pass an active industry filter.
pub fn filter_by_segment(
    comments: &[SurveyComment],
    segment: &Segment,
    mapping: &IndustryMapping,
) -> Vec<SurveyComment> {
    comments
        .iter()
        .filter(|c| segment.matches(c, mapping))
        .cloned()
        .collect()
}
