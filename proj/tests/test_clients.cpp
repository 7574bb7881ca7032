#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kval/clients.hpp"
#include "kval/util.hpp"
#include "support/http_fixtures.hpp"

#include <filesystem>
#include <fstream>
#include <thread>

using namespace kval;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("kval_clients_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("disk cache stores entries under sha256 keys") {
  auto dir = fresh_dir("cache");
  DiskCache cache(dir);
  Document d;
  d.id = "a1";
  d.title = "T";
  d.text = "hello world.";
  cache.put("wikipedia", "some query", {d});

  const auto path = cache.entry_path("wikipedia", "some query");
  CHECK(path.parent_path().filename() == "wikipedia");
  CHECK(path.filename().string() == sha256_hex("some query") + ".json");
  CHECK(fs::exists(path));

  auto entry = nlohmann::json::parse(slurp(path));
  CHECK(entry.at("query") == "some query");
  CHECK(entry.contains("fetched_at"));
  CHECK(entry.at("documents").size() == 1);

  auto got = cache.get("wikipedia", "some query");
  REQUIRE(got.has_value());
  CHECK((*got)[0].text == "hello world.");
  CHECK(!cache.get("wikipedia", "other query").has_value());
}

TEST_CASE("cached client fetches once and then hits the cache byte-stably") {
  auto dir = fresh_dir("cached_once");
  auto cache = std::make_shared<DiskCache>(dir);
  auto inner = std::make_shared<StaticClient>();
  Document d;
  d.id = "x";
  d.text = "a dog is a pet.";
  inner->add("dog", d);

  CachedClient client(inner, cache, "conceptnet");
  auto first = client.fetch("dog");
  REQUIRE(first.size() == 1);
  CHECK(inner->fetch_count() == 1);
  const std::string bytes = slurp(cache->entry_path("conceptnet", "dog"));

  auto second = client.fetch("dog");
  CHECK(second.size() == 1);
  CHECK(inner->fetch_count() == 1);  // served from cache
  CHECK(slurp(cache->entry_path("conceptnet", "dog")) == bytes);
}

TEST_CASE("concurrent fetches of one key resolve to a single fetch") {
  auto dir = fresh_dir("cached_concurrent");
  auto cache = std::make_shared<DiskCache>(dir);
  auto inner = std::make_shared<StaticClient>();
  Document d;
  d.id = "x";
  d.text = "t.";
  inner->add("dog", d);
  CachedClient client(inner, cache, "wikipedia");

  std::vector<std::thread> threads;
  std::atomic<int> ok{0};
  for (int i = 0; i < 8; ++i)
    threads.emplace_back([&] {
      if (client.fetch("dog").size() == 1) ++ok;
    });
  for (auto& t : threads) t.join();
  CHECK(ok == 8);
  CHECK(inner->fetch_count() == 1);
}

TEST_CASE("offline mode errors on a cache miss and serves hits") {
  auto dir = fresh_dir("offline");
  auto cache = std::make_shared<DiskCache>(dir);
  auto inner = std::make_shared<StaticClient>();
  Document d;
  d.id = "x";
  d.text = "t.";
  inner->add("dog", d);

  {
    CachedClient warm(inner, cache, "wikipedia", /*offline=*/false);
    warm.fetch("dog");
  }
  CachedClient offline(inner, cache, "wikipedia", /*offline=*/true);
  CHECK(offline.fetch("dog").size() == 1);
  CHECK(inner->fetch_count() == 1);
  CHECK_THROWS_AS(offline.fetch("cat"), ClientError);
}

TEST_CASE("wikipedia client searches then extracts articles") {
  testsrv::WikiServer server;
  server.add(11, "Forrest Gump",
             "Forrest Gump is a 1994 movie. A man tells his life story.");
  server.add(12, "Tennis", "Tennis is a racket sport.");

  WikipediaClient client(server.base_url(), /*articles_per_query=*/2,
                         RetryPolicy{2, 1});
  auto docs = client.fetch("movie");
  REQUIRE(docs.size() == 1);
  CHECK(docs[0].id == "11");
  CHECK(docs[0].title == "Forrest Gump");
  CHECK(docs[0].text.find("life story") != std::string::npos);
  CHECK(client.fetch("nonexistent topic").empty());
}

TEST_CASE("wikipedia client retries with backoff then succeeds") {
  testsrv::WikiServer server;
  server.add(11, "Dog", "A dog is a pet.");
  server.fail_next(2);
  WikipediaClient client(server.base_url(), 1, RetryPolicy{2, 1});
  auto docs = client.fetch("dog");
  REQUIRE(docs.size() == 1);
  CHECK(server.hits() >= 3);  // two failures plus the successful pair
}

TEST_CASE("wikipedia client gives up after exhausting retries") {
  testsrv::WikiServer server;
  server.add(11, "Dog", "A dog is a pet.");
  server.fail_next(5);
  WikipediaClient client(server.base_url(), 1, RetryPolicy{2, 1});
  CHECK_THROWS_AS(client.fetch("dog"), ClientError);
  CHECK(server.hits() == 3);  // 1 + 2 retries
}

TEST_CASE("conceptnet client renders edges through templates") {
  testsrv::ConceptNetServer server;
  server.add_edge("/c/en/dog", "/r/IsA", "a dog", "pet");
  server.add_edge("/c/en/dog", "/r/CapableOf", "a dog", "bark");
  server.add_edge("/c/en/dog", "/r/Unknown", "a dog", "a leash");
  server.add_edge("/c/en/dog", "/r/IsA", "x", "y", "[[a dog]] is [[an animal]]");

  ConceptNetClient client(server.base_url(), 50, RetryPolicy{2, 1});
  auto docs = client.fetch("Dog");
  REQUIRE(docs.size() == 1);
  CHECK(docs[0].id == "/c/en/dog");
  CHECK(docs[0].text.find("a dog is a pet.") != std::string::npos);
  CHECK(docs[0].text.find("a dog can bark.") != std::string::npos);
  // Unknown relations fall back to the generic template.
  CHECK(docs[0].text.find("a dog is related to a leash.") != std::string::npos);
  // Surface text is preferred, with brackets stripped.
  CHECK(docs[0].text.find("a dog is an animal.") != std::string::npos);
}

TEST_CASE("conceptnet client normalizes multi-word queries into node ids") {
  testsrv::ConceptNetServer server;
  server.add_edge("/c/en/sitting_man", "/r/AtLocation", "a sitting man", "a bench");
  ConceptNetClient client(server.base_url(), 50, RetryPolicy{2, 1});
  auto docs = client.fetch("Sitting Man");
  REQUIRE(docs.size() == 1);
  CHECK(docs[0].text == "a sitting man is at a bench.");
  CHECK(client.fetch("unknown thing").empty());
}

TEST_CASE("conceptnet template overrides are honored") {
  CHECK(ConceptNetClient::render_edge("/r/IsA", "x", "y",
                                      ConceptNetClient::default_templates()) ==
        "x is a y.");
  std::map<std::string, std::string> overrides{{"/r/IsA", "{start} == {end}"}};
  testsrv::ConceptNetServer server;
  server.add_edge("/c/en/dog", "/r/IsA", "dog", "pet");
  ConceptNetClient client(server.base_url(), 50, RetryPolicy{2, 1}, overrides);
  auto docs = client.fetch("dog");
  REQUIRE(docs.size() == 1);
  CHECK(docs[0].text == "dog == pet");
}

TEST_CASE("image fixture client reads ranked result files") {
  auto dir = fresh_dir("images");
  const std::string statement = "forrest gump features a man";
  auto img_dir = dir / sha256_hex(statement);
  fs::create_directories(img_dir);
  for (int i = 1; i <= 3; ++i) {
    std::ofstream out(img_dir / (std::to_string(i) + ".json"));
    out << R"({"url": "img)" << i << R"(", "object_features": [[1, 2], [3, 4]]})";
  }
  FixtureImageClient client(dir);
  auto docs = client.fetch(statement);
  REQUIRE(docs.size() == 3);
  CHECK(docs[0].title == "img1");
  REQUIRE(docs[0].object_features.size() == 2);
  CHECK(docs[0].object_features[1][1] == doctest::Approx(4.0));
  CHECK(client.fetch("missing statement").empty());
}

TEST_CASE("static client loads corpora from files") {
  auto dir = fresh_dir("corpus");
  {
    std::ofstream out(dir / "corpus.json");
    out << R"({"dog": [{"id": "a", "title": "Dog", "text": "a dog is a pet."}]})";
  }
  auto client = StaticClient::from_file(dir / "corpus.json");
  CHECK(client.fetch("DOG?").size() == 1);  // queries normalize
  CHECK(client.fetch("cat").empty());
}
