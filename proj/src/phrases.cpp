#include "kval/phrases.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <set>

namespace kval {

using nlohmann::json;

namespace {

NounPhrase make_phrase(const std::vector<Token>& tokens, const PhraseSpan& span,
                       PhraseKind kind, int index) {
  NounPhrase p;
  p.text = join_tokens(tokens, static_cast<std::size_t>(span.begin),
                       static_cast<std::size_t>(span.end));
  p.kind = kind;
  p.span_begin = span.begin;
  p.span_end = span.end;
  p.head = tokens[static_cast<std::size_t>(span.head)].surface;
  p.index = index;
  return p;
}

}  // namespace

ExtractedPhrases extract_noun_phrases(const std::string& question,
                                      const std::vector<std::string>& answers,
                                      const PhraseChunker& chunker) {
  const auto tokens = tokenize(question);
  if (tokens.empty()) throw UsageError("extract_noun_phrases: empty question");

  const ChunkResult parsed = chunker.parse(tokens);
  ExtractedPhrases out;
  if (parsed.target) {
    out.target = make_phrase(tokens, *parsed.target, PhraseKind::Target, 0);
  } else {
    // No wh/how word: the whole question stands in as the target.
    PhraseSpan whole{0, static_cast<int>(tokens.size()),
                     static_cast<int>(tokens.size()) - 1};
    for (int i = static_cast<int>(tokens.size()) - 1; i >= 0; --i) {
      if (lexicon::is_noun_candidate(tokens[static_cast<std::size_t>(i)].surface)) {
        whole.head = i;
        break;
      }
    }
    out.target = make_phrase(tokens, whole, PhraseKind::Target, 0);
    out.target.degenerate = true;
  }

  int index = 1;
  for (const PhraseSpan& span : parsed.phrases)
    out.question_phrases.push_back(make_phrase(tokens, span, PhraseKind::Question, index++));

  for (std::size_t a = 0; a < answers.size(); ++a) {
    const auto atoks = tokenize(answers[a]);
    if (atoks.empty())
      throw UsageError("extract_noun_phrases: empty answer candidate " + std::to_string(a));
    PhraseSpan span{0, static_cast<int>(atoks.size()),
                    static_cast<int>(atoks.size()) - 1};
    const ChunkResult aparsed = chunker.parse(atoks);
    if (!aparsed.phrases.empty()) span.head = aparsed.phrases.back().head;
    NounPhrase p = make_phrase(atoks, span, PhraseKind::Answer, static_cast<int>(a));
    out.answer_phrases.push_back(std::move(p));
  }
  return out;
}

ImageObjects load_image_objects(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("objects: cannot open " + file.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("objects: invalid JSON in " + file.string() + ": " + e.what());
  }
  ImageObjects out;
  try {
    out.image_id = doc.at("image_id").is_string()
                       ? doc.at("image_id").get<std::string>()
                       : std::to_string(doc.at("image_id").get<std::int64_t>());
    Eigen::Index feature_dim = -1;
    for (const auto& obj : doc.at("objects")) {
      DetectedObject d;
      d.object_id = obj.at("object_id").get<int>();
      d.label = obj.at("label").get<std::string>();
      for (const auto& a : obj.value("attributes", json::array()))
        d.attributes.push_back(a.get<std::string>());
      const auto& box = obj.at("box");
      if (box.size() != 4)
        throw DataError("objects: box must have 4 coordinates in " + file.string());
      for (int i = 0; i < 4; ++i) {
        d.box[static_cast<std::size_t>(i)] = box[static_cast<std::size_t>(i)].get<double>();
        if (d.box[static_cast<std::size_t>(i)] < 0.0 || d.box[static_cast<std::size_t>(i)] > 1.0)
          throw DataError("objects: box coordinate outside [0,1] in " + file.string());
      }
      const auto& feat = obj.at("feature");
      d.feature = Vec(feat.size());
      for (std::size_t i = 0; i < feat.size(); ++i)
        d.feature[static_cast<Eigen::Index>(i)] = feat[i].get<double>();
      if (feature_dim < 0) feature_dim = d.feature.size();
      if (d.feature.size() != feature_dim)
        throw DataError("objects: inconsistent feature dimensions in " + file.string());
      out.objects.push_back(std::move(d));
    }
  } catch (const json::exception& e) {
    throw DataError("objects: missing or mistyped field in " + file.string() + ": " + e.what());
  }
  return out;
}

std::vector<double> TokenOverlapLinker::score(
    const NounPhrase& phrase, const std::vector<DetectedObject>& objects) const {
  std::vector<double> out;
  out.reserve(objects.size());
  const std::vector<Token> head{{phrase.head, 0}};
  for (const DetectedObject& obj : objects) {
    std::vector<Token> object_tokens = tokenize(obj.label);
    for (const auto& attr : obj.attributes)
      for (const Token& t : tokenize(attr)) object_tokens.push_back(t);
    double s = object_tokens.empty() ? 0.0 : mean_recall(head, object_tokens, table_);
    out.push_back(std::clamp(s, 0.0, 1.0));
  }
  return out;
}

std::vector<LinkedObject> link_phrase(const NounPhrase& phrase,
                                      const std::vector<DetectedObject>& objects,
                                      const ObjectLinker& linker,
                                      double threshold) {
  if (objects.empty()) throw UsageError("link_phrase: no detected objects");
  const std::vector<double> scores = linker.score(phrase, objects);
  if (scores.size() != objects.size())
    throw UsageError("link_phrase: linker returned wrong score count");
  std::vector<LinkedObject> approved;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (scores[i] > threshold)  // strictly higher; 0.5 exactly is excluded
      approved.push_back(LinkedObject{objects[i], scores[i]});
  }
  std::stable_sort(approved.begin(), approved.end(),
                   [](const LinkedObject& a, const LinkedObject& b) {
                     if (a.score != b.score) return a.score > b.score;
                     return a.object.object_id < b.object.object_id;
                   });
  return approved;
}

std::vector<SearchQuery> generate_queries(const NounPhrase& phrase, int phrase_id,
                                          const std::vector<LinkedObject>& linked,
                                          int k_max) {
  if (k_max < 1) throw UsageError("generate_queries: k_max must be >= 1");
  std::vector<SearchQuery> out;
  std::set<std::string> seen;
  auto push = [&](const std::string& text) {
    if (static_cast<int>(out.size()) >= k_max) return;
    const std::string norm = normalize_text(text);
    if (norm.empty() || !seen.insert(norm).second) return;
    out.push_back(SearchQuery{norm, phrase_id, static_cast<int>(out.size()) + 1});
  };
  push(phrase.head);
  for (const LinkedObject& link : linked)
    for (const std::string& attr : link.object.attributes)
      push(attr + " " + phrase.head);
  return out;
}

}  // namespace kval
