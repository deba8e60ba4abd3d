//! Stack Exchange tag statistics for the support attribute.

use serde::Deserialize;

use super::http::ServiceClient;
use super::{decode, CollectError, Partial, SupportStats};

const SITE: &str = "stackoverflow";

#[derive(Debug, Clone)]
pub struct StackExchangeClient {
    client: ServiceClient,
}

#[derive(Deserialize)]
struct TotalResponse {
    total: u64,
}

/// Default Q&A tag for a repository: its name, lowercased.
pub fn default_tag(repo_name: &str) -> String {
    repo_name.trim().to_lowercase()
}

impl StackExchangeClient {
    pub fn new(client: ServiceClient) -> Self {
        StackExchangeClient { client }
    }

    fn total(&self, tag: &str, answered_only: bool) -> Result<u64, CollectError> {
        let tag: String = url::form_urlencoded::byte_serialize(tag.as_bytes()).collect();
        let mut path = format!("/2.3/search/advanced?site={SITE}&tagged={tag}&filter=total");
        if answered_only {
            path.push_str("&answers=1");
        }
        let response = self.client.get(&path)?;
        if !response.is_success() {
            return Err(CollectError::Status {
                service: self.client.service().to_string(),
                status: response.status,
                path,
            });
        }
        let parsed: TotalResponse = decode(self.client.service(), &path, &response.body)?;
        Ok(parsed.total)
    }

    /// Questions carrying `tag`, and how many of them have at least one
    /// answer. Unknown tags yield zero counts.
    pub fn fetch_support_stats(&self, tag: &str) -> Result<Partial<SupportStats>, CollectError> {
        let question_count = self.total(tag, false)?;
        let mut answered_count = self.total(tag, true)?;
        let mut result = Partial::complete(SupportStats {
            tag: tag.to_string(),
            question_count,
            answered_count,
        });
        if answered_count > question_count {
            // Two separate queries can race against new answers.
            result.warnings.push(format!(
                "answered count {answered_count} exceeded question count {question_count} for tag {tag:?}; clamped"
            ));
            answered_count = question_count;
            result.value.answered_count = answered_count;
        }
        Ok(result)
    }
}
