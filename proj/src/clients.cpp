#include "kval/clients.hpp"

#include "kval/text.hpp"
#include "kval/util.hpp"

#include <httplib.h>

#include <fstream>
#include <thread>

namespace kval {

using nlohmann::json;

std::string to_string(KnowledgeSource source) {
  switch (source) {
    case KnowledgeSource::Wikipedia: return "wikipedia";
    case KnowledgeSource::ConceptNet: return "conceptnet";
    case KnowledgeSource::Images: return "images";
  }
  return "unknown";
}

KnowledgeSource knowledge_source_from_string(const std::string& name) {
  if (name == "wikipedia") return KnowledgeSource::Wikipedia;
  if (name == "conceptnet") return KnowledgeSource::ConceptNet;
  if (name == "images") return KnowledgeSource::Images;
  throw ConfigError("unknown knowledge source: " + name);
}

void to_json(json& j, const Document& d) {
  j = json{{"id", d.id}, {"title", d.title}, {"text", d.text}};
  if (!d.object_features.empty()) {
    json feats = json::array();
    for (const Vec& f : d.object_features) {
      json row = json::array();
      for (Eigen::Index i = 0; i < f.size(); ++i) row.push_back(f[i]);
      feats.push_back(std::move(row));
    }
    j["object_features"] = std::move(feats);
  }
}

void from_json(const json& j, Document& d) {
  d.id = j.value("id", "");
  d.title = j.value("title", "");
  d.text = j.value("text", "");
  d.object_features.clear();
  if (j.contains("object_features")) {
    for (const auto& row : j.at("object_features")) {
      Vec f(row.size());
      for (std::size_t i = 0; i < row.size(); ++i)
        f[static_cast<Eigen::Index>(i)] = row[i].get<double>();
      d.object_features.push_back(std::move(f));
    }
  }
}

DiskCache::DiskCache(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(root_);
}

std::filesystem::path DiskCache::entry_path(const std::string& source,
                                            const std::string& query) const {
  return root_ / source / (sha256_hex(query) + ".json");
}

std::optional<std::vector<Document>> DiskCache::get(const std::string& source,
                                                    const std::string& query) const {
  const auto path = entry_path(source, query);
  std::ifstream in(path);
  if (!in) return std::nullopt;
  try {
    json entry = json::parse(in);
    return entry.at("documents").get<std::vector<Document>>();
  } catch (const json::exception& e) {
    throw DataError("cache: corrupt entry " + path.string() + ": " + e.what());
  }
}

void DiskCache::put(const std::string& source, const std::string& query,
                    const std::vector<Document>& documents) {
  const auto path = entry_path(source, query);
  std::filesystem::create_directories(path.parent_path());
  json entry{{"query", query},
             {"fetched_at", iso8601_utc_now()},
             {"documents", documents}};
  // Write-then-rename keeps readers away from partial entries.
  auto tmp = path;
  tmp += ".tmp" + std::to_string(
             std::hash<std::thread::id>{}(std::this_thread::get_id()) & 0xffff);
  {
    std::ofstream out(tmp);
    if (!out) throw DataError("cache: cannot write " + tmp.string());
    out << entry.dump(2) << "\n";
  }
  std::filesystem::rename(tmp, path);
}

CachedClient::CachedClient(std::shared_ptr<KnowledgeClient> inner,
                           std::shared_ptr<DiskCache> cache, std::string source,
                           bool offline)
    : inner_(std::move(inner)),
      cache_(std::move(cache)),
      source_(std::move(source)),
      offline_(offline) {}

std::vector<Document> CachedClient::fetch(const std::string& query) {
  if (auto hit = cache_->get(source_, query)) return *hit;
  if (offline_)
    throw ClientError("offline: cache miss for " + source_ + " query '" + query + "'");

  std::shared_future<std::vector<Document>> future;
  std::shared_ptr<std::promise<std::vector<Document>>> promise;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = inflight_.find(query);
    if (it != inflight_.end()) {
      future = it->second;
    } else {
      // A prior owner may have stored the entry between the miss and the lock.
      if (auto hit = cache_->get(source_, query)) return *hit;
      promise = std::make_shared<std::promise<std::vector<Document>>>();
      future = promise->get_future().share();
      inflight_.emplace(query, future);
    }
  }
  if (!promise) return future.get();  // someone else is fetching this key

  auto release = [&] {
    std::lock_guard<std::mutex> lock(mutex_);
    inflight_.erase(query);
  };
  try {
    auto docs = inner_->fetch(query);
    cache_->put(source_, query, docs);
    promise->set_value(docs);
    release();
    return docs;
  } catch (...) {
    promise->set_exception(std::current_exception());
    release();
    throw;
  }
}

namespace {

json http_get_json(const std::string& base_url, const std::string& path,
                   const httplib::Params& params, const RetryPolicy& retry) {
  int delay = retry.backoff_ms;
  std::string last_error;
  for (int attempt = 0; attempt <= retry.retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(delay));
      delay *= 2;
    }
    httplib::Client cli(base_url);
    cli.set_connection_timeout(5);
    cli.set_read_timeout(10);
    auto res = cli.Get(path, params, httplib::Headers{});
    if (!res) {
      last_error = "transport error " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    try {
      return json::parse(res->body);
    } catch (const json::exception& e) {
      last_error = std::string("bad JSON: ") + e.what();
      continue;
    }
  }
  throw ClientError("GET " + base_url + path + " failed after " +
                    std::to_string(retry.retries + 1) + " attempts: " + last_error);
}

}  // namespace

WikipediaClient::WikipediaClient(std::string base_url, int articles_per_query,
                                 RetryPolicy retry)
    : base_url_(std::move(base_url)),
      articles_per_query_(articles_per_query),
      retry_(retry) {}

std::vector<Document> WikipediaClient::fetch(const std::string& query) {
  httplib::Params search_params{{"action", "query"},
                                {"list", "search"},
                                {"format", "json"},
                                {"srsearch", query},
                                {"srlimit", std::to_string(articles_per_query_)}};
  json search = http_get_json(base_url_, "/w/api.php", search_params, retry_);

  std::vector<std::pair<std::string, std::string>> hits;  // pageid, title
  try {
    for (const auto& item : search.at("query").at("search")) {
      hits.emplace_back(std::to_string(item.at("pageid").get<std::int64_t>()),
                        item.value("title", ""));
      if (static_cast<int>(hits.size()) >= articles_per_query_) break;
    }
  } catch (const json::exception& e) {
    throw ClientError("wikipedia: unexpected search payload: " + std::string(e.what()));
  }
  if (hits.empty()) return {};

  std::string pageids;
  for (const auto& [id, _] : hits) {
    if (!pageids.empty()) pageids += "|";
    pageids += id;
  }
  httplib::Params extract_params{{"action", "query"},
                                 {"prop", "extracts"},
                                 {"explaintext", "1"},
                                 {"format", "json"},
                                 {"pageids", pageids}};
  json extract = http_get_json(base_url_, "/w/api.php", extract_params, retry_);

  std::vector<Document> docs;
  try {
    const auto& pages = extract.at("query").at("pages");
    for (const auto& [id, title] : hits) {
      if (!pages.contains(id)) continue;
      Document d;
      d.id = id;
      d.title = pages.at(id).value("title", title);
      d.text = pages.at(id).value("extract", "");
      if (!d.text.empty()) docs.push_back(std::move(d));
    }
  } catch (const json::exception& e) {
    throw ClientError("wikipedia: unexpected extract payload: " + std::string(e.what()));
  }
  return docs;
}

const std::map<std::string, std::string>& ConceptNetClient::default_templates() {
  static const std::map<std::string, std::string> kTemplates = {
      {"/r/IsA", "{start} is a {end}."},
      {"/r/PartOf", "{start} is part of {end}."},
      {"/r/HasA", "{start} has {end}."},
      {"/r/UsedFor", "{start} is used for {end}."},
      {"/r/CapableOf", "{start} can {end}."},
      {"/r/AtLocation", "{start} is at {end}."},
      {"/r/RelatedTo", "{start} is related to {end}."},
      {"/r/HasProperty", "{start} is {end}."},
      {"/r/MadeOf", "{start} is made of {end}."},
      {"/r/Causes", "{start} causes {end}."},
      {"/r/Desires", "{start} desires {end}."},
      {"/r/Synonym", "{start} is similar to {end}."},
      {"/r/Antonym", "{start} is the opposite of {end}."},
      {"/r/DefinedAs", "{start} is defined as {end}."},
      {"/r/HasSubevent", "{start} involves {end}."},
      {"/r/ReceivesAction", "{start} can be {end}."},
  };
  return kTemplates;
}

std::string ConceptNetClient::render_edge(
    const std::string& relation, const std::string& start, const std::string& end,
    const std::map<std::string, std::string>& templates) {
  std::string tpl = "{start} is related to {end}.";
  if (auto it = templates.find(relation); it != templates.end()) tpl = it->second;
  auto substitute = [](std::string s, const std::string& key, const std::string& value) {
    if (auto pos = s.find(key); pos != std::string::npos)
      s.replace(pos, key.size(), value);
    return s;
  };
  return substitute(substitute(tpl, "{start}", start), "{end}", end);
}

ConceptNetClient::ConceptNetClient(std::string base_url, int edge_limit,
                                   RetryPolicy retry,
                                   std::map<std::string, std::string> template_overrides)
    : base_url_(std::move(base_url)), edge_limit_(edge_limit), retry_(retry),
      templates_(default_templates()) {
  for (auto& [k, v] : template_overrides) templates_[k] = v;
}

std::vector<Document> ConceptNetClient::fetch(const std::string& query) {
  std::string term = normalize_text(query);
  for (char& c : term)
    if (c == ' ') c = '_';
  if (term.empty()) return {};
  const std::string node = "/c/en/" + term;

  httplib::Params params{{"node", node}, {"limit", std::to_string(edge_limit_)}};
  json payload = http_get_json(base_url_, "/query", params, retry_);

  std::string text;
  int rendered = 0;
  try {
    for (const auto& edge : payload.value("edges", json::array())) {
      std::string sentence;
      const std::string surface = edge.value("surfaceText", "");
      if (!surface.empty()) {
        sentence = surface;
        std::string cleaned;
        for (std::size_t i = 0; i < sentence.size(); ++i) {
          if (sentence[i] == '[' || sentence[i] == ']') continue;
          cleaned.push_back(sentence[i]);
        }
        sentence = cleaned;
        if (!sentence.empty() && sentence.back() != '.') sentence += ".";
      } else {
        const std::string rel =
            edge.contains("rel") ? edge.at("rel").value("@id", "") : "";
        const std::string start =
            edge.contains("start") ? edge.at("start").value("label", "") : "";
        const std::string end =
            edge.contains("end") ? edge.at("end").value("label", "") : "";
        if (start.empty() || end.empty()) continue;
        sentence = render_edge(rel, start, end, templates_);
      }
      if (sentence.empty()) continue;
      if (!text.empty()) text += " ";
      text += sentence;
      if (++rendered >= edge_limit_) break;
    }
  } catch (const json::exception& e) {
    throw ClientError("conceptnet: unexpected payload: " + std::string(e.what()));
  }
  if (text.empty()) return {};
  Document d;
  d.id = node;
  d.title = term;
  d.text = std::move(text);
  return {std::move(d)};
}

FixtureImageClient::FixtureImageClient(std::filesystem::path root, int max_results)
    : root_(std::move(root)), max_results_(max_results) {}

std::vector<Document> FixtureImageClient::fetch(const std::string& query) {
  const auto dir = root_ / sha256_hex(query);
  std::vector<Document> docs;
  for (int i = 1; i <= max_results_; ++i) {
    const auto path = dir / (std::to_string(i) + ".json");
    std::ifstream in(path);
    if (!in) continue;
    try {
      json j = json::parse(in);
      Document d;
      d.id = path.string();
      d.title = j.value("url", path.filename().string());
      for (const auto& row : j.at("object_features")) {
        Vec f(row.size());
        for (std::size_t k = 0; k < row.size(); ++k)
          f[static_cast<Eigen::Index>(k)] = row[k].get<double>();
        d.object_features.push_back(std::move(f));
      }
      docs.push_back(std::move(d));
    } catch (const json::exception& e) {
      throw DataError("image fixture: bad file " + path.string() + ": " + e.what());
    }
  }
  return docs;
}

StaticClient::StaticClient(std::map<std::string, std::vector<Document>> corpus)
    : corpus_(std::move(corpus)) {}

StaticClient StaticClient::from_file(const std::filesystem::path& corpus_json) {
  std::ifstream in(corpus_json);
  if (!in) throw DataError("corpus: cannot open " + corpus_json.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("corpus: invalid JSON in " + corpus_json.string() + ": " + e.what());
  }
  std::map<std::string, std::vector<Document>> corpus;
  for (const auto& [query, docs] : j.items())
    corpus[query] = docs.get<std::vector<Document>>();
  return StaticClient(std::move(corpus));
}

std::vector<Document> StaticClient::fetch(const std::string& query) {
  ++fetch_count_;
  if (fail_next_ > 0) {
    --fail_next_;
    throw ClientError("static client: simulated failure");
  }
  auto it = corpus_.find(normalize_text(query));
  if (it == corpus_.end()) return {};
  return it->second;
}

void StaticClient::add(const std::string& query, Document doc) {
  corpus_[normalize_text(query)].push_back(std::move(doc));
}

}  // namespace kval
