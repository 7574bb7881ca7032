#pragma once

#include "kval/types.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace kval {

enum class KnowledgeSource { Wikipedia, ConceptNet, Images };

std::string to_string(KnowledgeSource source);
KnowledgeSource knowledge_source_from_string(const std::string& name);

/// One retrieval result: an article, a rendered set of concept edges, or an
/// image descriptor with pre-extracted object features.
struct Document {
  std::string id;
  std::string title;
  std::string text;
  std::vector<Vec> object_features;  // image documents only
};

void to_json(nlohmann::json& j, const Document& d);
void from_json(const nlohmann::json& j, Document& d);

class KnowledgeClient {
 public:
  virtual ~KnowledgeClient() = default;
  /// Throws ClientError when the backend cannot produce a result.
  virtual std::vector<Document> fetch(const std::string& query) = 0;
};

/// File cache at `<root>/<source>/<sha256 of query>.json`. Entries hold
/// `{query, fetched_at, documents}` and are written atomically.
class DiskCache {
 public:
  explicit DiskCache(std::filesystem::path root);

  std::optional<std::vector<Document>> get(const std::string& source,
                                           const std::string& query) const;
  void put(const std::string& source, const std::string& query,
           const std::vector<Document>& documents);

  std::filesystem::path entry_path(const std::string& source,
                                   const std::string& query) const;
  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
};

/// Caching decorator. Identical queries hit the cache after the first fetch;
/// concurrent fetches of one key resolve to a single stored result. In
/// offline mode a cache miss raises ClientError instead of fetching.
class CachedClient final : public KnowledgeClient {
 public:
  CachedClient(std::shared_ptr<KnowledgeClient> inner,
               std::shared_ptr<DiskCache> cache, std::string source,
               bool offline = false);

  std::vector<Document> fetch(const std::string& query) override;

 private:
  std::shared_ptr<KnowledgeClient> inner_;
  std::shared_ptr<DiskCache> cache_;
  std::string source_;
  bool offline_;
  std::mutex mutex_;
  std::map<std::string, std::shared_future<std::vector<Document>>> inflight_;
};

struct RetryPolicy {
  int retries = 2;       // attempts = retries + 1
  int backoff_ms = 100;  // doubles per attempt
};

/// MediaWiki search + plain-text extract endpoints.
class WikipediaClient final : public KnowledgeClient {
 public:
  explicit WikipediaClient(std::string base_url, int articles_per_query = 1,
                           RetryPolicy retry = {});
  std::vector<Document> fetch(const std::string& query) override;

 private:
  std::string base_url_;
  int articles_per_query_;
  RetryPolicy retry_;
};

/// ConceptNet query endpoint; edges are rendered to sentences with fixed
/// per-relation templates ("{start}" / "{end}" placeholders).
class ConceptNetClient final : public KnowledgeClient {
 public:
  explicit ConceptNetClient(std::string base_url, int edge_limit = 50,
                            RetryPolicy retry = {},
                            std::map<std::string, std::string> template_overrides = {});
  std::vector<Document> fetch(const std::string& query) override;

  static const std::map<std::string, std::string>& default_templates();
  static std::string render_edge(const std::string& relation,
                                 const std::string& start, const std::string& end,
                                 const std::map<std::string, std::string>& templates);

 private:
  std::string base_url_;
  int edge_limit_;
  RetryPolicy retry_;
  std::map<std::string, std::string> templates_;
};

/// Image search stand-in: results are read from
/// `<root>/<sha256 of query>/{1..5}.json`, each holding pre-extracted object
/// feature vectors for one image. A missing directory simply yields nothing.
class FixtureImageClient final : public KnowledgeClient {
 public:
  explicit FixtureImageClient(std::filesystem::path root, int max_results = 5);
  std::vector<Document> fetch(const std::string& query) override;

 private:
  std::filesystem::path root_;
  int max_results_;
};

/// In-memory corpus keyed by normalized query text. Unknown queries yield an
/// empty result. Optionally fails a fixed number of times first (tests).
class StaticClient final : public KnowledgeClient {
 public:
  explicit StaticClient(std::map<std::string, std::vector<Document>> corpus = {});
  static StaticClient from_file(const std::filesystem::path& corpus_json);

  std::vector<Document> fetch(const std::string& query) override;

  void add(const std::string& query, Document doc);
  void fail_next(int times) { fail_next_ = times; }
  int fetch_count() const { return fetch_count_; }

 private:
  std::map<std::string, std::vector<Document>> corpus_;
  int fail_next_ = 0;
  int fetch_count_ = 0;
};

}  // namespace kval
