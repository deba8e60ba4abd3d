//! GitHub REST collector: repository information, community interest and
//! license terms.

use std::collections::BTreeMap;

use serde::Deserialize;

use super::http::{HttpResponse, ServiceClient};
use super::{decode, CollectError, CommunityInterest, LicenseInfo, Partial, RepoMetadata};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RepoSnapshot {
    pub metadata: RepoMetadata,
    pub community: CommunityInterest,
    pub license: LicenseInfo,
}

#[derive(Debug, Clone)]
pub struct GithubClient {
    client: ServiceClient,
}

#[derive(Deserialize)]
struct RepoResponse {
    name: String,
    description: Option<String>,
    topics: Option<Vec<String>>,
    url: String,
    stargazers_count: u64,
    forks_count: u64,
    subscribers_count: Option<u64>,
    open_issues_count: u64,
    license: Option<LicenseRef>,
}

#[derive(Deserialize)]
struct LicenseRef {
    key: String,
    spdx_id: Option<String>,
}

#[derive(Deserialize)]
struct CommunityProfile {
    health_percentage: Option<u64>,
}

#[derive(Deserialize)]
struct LicenseDetail {
    #[serde(default)]
    permissions: Vec<String>,
    #[serde(default)]
    conditions: Vec<String>,
    #[serde(default)]
    limitations: Vec<String>,
}

/// Checks an `owner/repo` slug and splits it.
pub fn parse_slug(slug: &str) -> Option<(String, String)> {
    let (owner, repo) = slug.trim().trim_end_matches(".git").split_once('/')?;
    let valid = |s: &str| {
        !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
    };
    (valid(owner) && valid(repo)).then(|| (owner.to_string(), repo.to_string()))
}

/// `owner/repo` of a github.com remote URL, if it is one.
pub fn slug_from_remote(url: &str) -> Option<(String, String)> {
    let rest = url
        .split_once("github.com")
        .map(|(_, rest)| rest.trim_start_matches([':', '/']))?;
    let mut parts = rest.trim_end_matches('/').splitn(3, '/');
    let owner = parts.next()?;
    let repo = parts.next()?;
    parse_slug(&format!("{owner}/{repo}"))
}

impl GithubClient {
    pub fn new(client: ServiceClient, token: Option<&str>) -> Self {
        let mut client = client
            .with_header("accept", "application/vnd.github+json")
            .with_header("x-github-api-version", "2022-11-28");
        if let Some(token) = token {
            client = client.with_header("authorization", &format!("Bearer {token}"));
        }
        GithubClient { client }
    }

    fn get_json<T: serde::de::DeserializeOwned>(&self, path: &str) -> Result<T, CollectError> {
        let response = self.client.get(path)?;
        expect_success(&response, self.client.service(), path)?;
        decode(self.client.service(), path, &response.body)
    }

    /// Repository metadata, community interest and license.
    ///
    /// Only the main repository lookup is fatal; languages, community health
    /// and license terms degrade to "unavailable" markers.
    pub fn fetch_repo_metadata(&self, owner: &str, repo: &str) -> Result<Partial<RepoSnapshot>, CollectError> {
        let base = format!("/repos/{owner}/{repo}");
        let response = self.client.get(&base)?;
        if response.status == 404 {
            return Err(CollectError::NotFound(format!("repository {owner}/{repo}")));
        }
        expect_success(&response, self.client.service(), &base)?;
        let info: RepoResponse = decode(self.client.service(), &base, &response.body)?;

        let mut unavailable = Vec::new();
        let mut warnings = Vec::new();
        let mut degrade = |field: &str, err: CollectError| {
            unavailable.push(field.to_string());
            warnings.push(format!("{field} unavailable: {err}"));
        };

        let description = match info.description {
            Some(d) => d,
            None => {
                degrade("repo_metadata.description", CollectError::NotFound("description".into()));
                String::new()
            }
        };
        let topics = match info.topics {
            Some(t) => t,
            None => {
                degrade("repo_metadata.topics", CollectError::NotFound("topics".into()));
                Vec::new()
            }
        };
        let watchers = match info.subscribers_count {
            Some(w) => w,
            None => {
                degrade("community.watchers", CollectError::NotFound("subscribers_count".into()));
                0
            }
        };

        let languages = match self.get_json::<BTreeMap<String, u64>>(&format!("{base}/languages")) {
            Ok(l) => l,
            Err(e) => {
                degrade("repo_metadata.languages", e);
                BTreeMap::new()
            }
        };

        let community_health_pct =
            match self.get_json::<CommunityProfile>(&format!("{base}/community/profile")) {
                Ok(CommunityProfile {
                    health_percentage: Some(pct),
                }) => Some(pct.min(100) as u8),
                Ok(_) => {
                    degrade(
                        "repo_metadata.community_health_pct",
                        CollectError::NotFound("health_percentage".into()),
                    );
                    None
                }
                Err(e) => {
                    degrade("repo_metadata.community_health_pct", e);
                    None
                }
            };

        let license = match info.license {
            None => LicenseInfo::no_assertion(),
            Some(LicenseRef { spdx_id, key }) => {
                let spdx_id = spdx_id.filter(|s| !s.is_empty());
                match spdx_id {
                    None => LicenseInfo::no_assertion(),
                    Some(id) if id == LicenseInfo::NOASSERTION => LicenseInfo::no_assertion(),
                    Some(id) => match self.get_json::<LicenseDetail>(&format!("/licenses/{key}")) {
                        Ok(detail) => LicenseInfo {
                            spdx_id: id,
                            permissions: detail.permissions,
                            conditions: detail.conditions,
                            limitations: detail.limitations,
                        },
                        Err(e) => {
                            degrade("license.terms", e);
                            LicenseInfo {
                                spdx_id: id,
                                ..LicenseInfo::no_assertion()
                            }
                        }
                    },
                }
            }
        };

        Ok(Partial {
            value: RepoSnapshot {
                metadata: RepoMetadata {
                    name: info.name,
                    description,
                    topics,
                    api_url: info.url,
                    languages,
                    community_health_pct,
                    open_issues: info.open_issues_count,
                },
                community: CommunityInterest {
                    stars: info.stargazers_count,
                    forks: info.forks_count,
                    watchers,
                },
                license,
            },
            unavailable,
            warnings,
        })
    }
}

fn expect_success(response: &HttpResponse, service: &str, path: &str) -> Result<(), CollectError> {
    if response.status == 404 {
        return Err(CollectError::NotFound(format!("{service} resource {path}")));
    }
    if !response.is_success() {
        return Err(CollectError::Status {
            service: service.to_string(),
            status: response.status,
            path: path.to_string(),
        });
    }
    Ok(())
}
