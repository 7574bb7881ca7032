#include "kval/retrieval.hpp"

#include "kval/util.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

namespace kval {

namespace {

bool reads_as_sentence(const std::string& answer) {
  const std::string trimmed = [&] {
    auto end = answer.find_last_not_of(" \t\n");
    return end == std::string::npos ? std::string() : answer.substr(0, end + 1);
  }();
  if (!trimmed.empty() &&
      (trimmed.back() == '.' || trimmed.back() == '!' || trimmed.back() == '?'))
    return true;
  for (const Token& t : tokenize(answer))
    if (lexicon::is_auxiliary(t.surface)) return true;
  return false;
}

}  // namespace

Statement RuleStatementConverter::convert(const std::string& question,
                                          const std::string& answer) const {
  const std::string norm_answer = normalize_text(answer);
  if (reads_as_sentence(answer)) return Statement{answer, 0, norm_answer};

  const auto tokens = tokenize(question);
  // Copula inversion: "what is X" becomes "X is <answer>".
  if (tokens.size() >= 3 &&
      (tokens[0].surface == "what" || tokens[0].surface == "which" ||
       tokens[0].surface == "who") &&
      lexicon::is_auxiliary(tokens[1].surface)) {
    std::string rest = join_tokens(tokens, 2, tokens.size());
    return Statement{rest + " " + tokens[1].surface + " " + norm_answer, 0, norm_answer};
  }

  const ChunkResult parsed = chunker_.parse(tokens);
  if (parsed.target) {
    std::string text;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const bool in_target = static_cast<int>(i) >= parsed.target->begin &&
                             static_cast<int>(i) < parsed.target->end;
      if (in_target) {
        if (static_cast<int>(i) == parsed.target->begin) {
          if (!text.empty()) text += " ";
          text += norm_answer;
        }
        continue;
      }
      if (!text.empty()) text += " ";
      text += tokens[i].surface;
    }
    return Statement{text, 0, norm_answer};
  }

  // No wh/how word at all: append the answer to the statement-ified question.
  return Statement{join_tokens(tokens, 0, tokens.size()) + " " + norm_answer, 0,
                   norm_answer};
}

Statement qa_to_statement(const std::string& question, const std::string& answer,
                          const StatementConverter& converter) {
  if (normalize_text(question).empty())
    throw UsageError("qa_to_statement: empty question");
  if (normalize_text(answer).empty())
    throw UsageError("qa_to_statement: empty answer");
  Statement s = converter.convert(question, answer);
  if (normalize_text(s.text).find(normalize_text(answer)) == std::string::npos)
    log_warn("statement does not contain its answer: '" + s.text + "'");
  return s;
}

std::vector<std::string> split_sentences(const std::string& text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    // Trim and keep only fragments with at least one word character.
    std::size_t a = current.find_first_not_of(" \t\n\r");
    std::size_t b = current.find_last_not_of(" \t\n\r");
    if (a != std::string::npos) {
      std::string s = current.substr(a, b - a + 1);
      if (std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::isalnum(c); }))
        out.push_back(std::move(s));
    }
    current.clear();
  };
  for (char c : text) {
    if (c == '.' || c == '!' || c == '?' || c == '\n') {
      flush();
    } else {
      current.push_back(c);
    }
  }
  flush();
  return out;
}

RetrievedSentence decontextualize(const RetrievedSentence& sentence,
                                  const std::string& context,
                                  const Decontextualizer& d) {
  if (sentence.source != KnowledgeSource::Wikipedia)
    throw UsageError("decontextualize: only Wikipedia sentences are rewritten");
  RetrievedSentence out = sentence;
  out.text = d.rewrite(sentence.text, context);
  return out;
}

TextualPool build_textual_pool(const std::vector<SearchQuery>& queries,
                               const std::vector<Statement>& statements,
                               KnowledgeClient& wikipedia,
                               KnowledgeClient& conceptnet,
                               const TokenEncoder& encoder,
                               int top_per_article,
                               const Decontextualizer* decontext) {
  if (queries.empty()) throw UsageError("build_textual_pool: no queries");
  if (statements.empty()) throw UsageError("build_textual_pool: no statements");

  std::vector<std::vector<Token>> statement_tokens;
  statement_tokens.reserve(statements.size());
  for (const Statement& s : statements) statement_tokens.push_back(tokenize(s.text));

  TextualPool result;
  // Dedup key: (source, normalized text) -> index into result.sentences.
  std::map<std::pair<int, std::string>, std::size_t> seen;
  // (source, article, statement) -> normalized texts already pushed.
  std::map<std::tuple<int, std::string, int>, std::set<std::string>> pushed;
  std::set<std::pair<int, std::string>> articles_done;  // avoid re-scoring refetches

  auto process_source = [&](KnowledgeClient& client, KnowledgeSource source) {
    const int source_id = static_cast<int>(source);
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
      std::vector<Document> docs;
      try {
        docs = client.fetch(queries[qi].text);
      } catch (const ClientError& e) {
        log_warn("query '" + queries[qi].text + "' against " + to_string(source) +
                 " skipped: " + e.what());
        continue;
      }
      for (const Document& doc : docs) {
        if (!articles_done.insert({source_id, doc.id}).second) continue;
        const std::vector<std::string> sentences = split_sentences(doc.text);
        if (sentences.empty()) continue;
        std::vector<std::vector<Token>> sentence_tokens;
        sentence_tokens.reserve(sentences.size());
        for (const auto& s : sentences) sentence_tokens.push_back(tokenize(s));

        for (int si = 0; si < static_cast<int>(statements.size()); ++si) {
          // Rank this article's sentences against one statement.
          std::vector<std::pair<double, int>> scored;
          for (int k = 0; k < static_cast<int>(sentences.size()); ++k) {
            if (sentence_tokens[static_cast<std::size_t>(k)].empty()) continue;
            const MatchScore ms =
                greedy_match(sentence_tokens[static_cast<std::size_t>(k)],
                             statement_tokens[static_cast<std::size_t>(si)], encoder);
            scored.emplace_back(ms.f1, k);
          }
          std::stable_sort(scored.begin(), scored.end(),
                           [](const auto& a, const auto& b) { return a.first > b.first; });
          if (static_cast<int>(scored.size()) > top_per_article)
            scored.resize(static_cast<std::size_t>(top_per_article));

          auto& pushed_texts = pushed[{source_id, doc.id, si}];
          for (const auto& [f1, k] : scored) {
            std::string text = sentences[static_cast<std::size_t>(k)];
            if (source == KnowledgeSource::Wikipedia && decontext != nullptr)
              text = decontext->rewrite(text, doc.text);
            const std::string norm = normalize_text(text);
            if (norm.empty()) continue;
            const double score = std::clamp(f1, 0.0, 1.0);
            pushed_texts.insert(norm);
            auto [it, inserted] = seen.try_emplace({source_id, norm},
                                                   result.sentences.size());
            if (inserted) {
              RetrievedSentence rs;
              rs.text = std::move(text);
              rs.source = source;
              rs.origin_query = queries[qi];
              rs.article_id = doc.id;
              rs.match_score = score;
              result.sentences.push_back(std::move(rs));
            } else {
              auto& existing = result.sentences[it->second];
              existing.match_score = std::max(existing.match_score, score);
            }
          }
        }
      }
    }
  };

  process_source(wikipedia, KnowledgeSource::Wikipedia);
  process_source(conceptnet, KnowledgeSource::ConceptNet);

  for (const auto& [key, texts] : pushed) {
    const auto& [source_id, article_id, statement_index] = key;
    result.pushes.push_back(TextualPool::PushCount{
        static_cast<KnowledgeSource>(source_id), article_id, statement_index,
        static_cast<int>(texts.size())});
  }
  return result;
}

PoolMatches match_pool_to_queries(std::vector<RetrievedSentence> pool,
                                  const std::vector<SearchQuery>& queries,
                                  const WordVectorTable& table,
                                  int max_per_query, double threshold) {
  if (max_per_query < 1)
    throw UsageError("match_pool_to_queries: max_per_query must be >= 1");

  std::vector<std::vector<Token>> query_tokens;
  query_tokens.reserve(queries.size());
  for (const auto& q : queries) query_tokens.push_back(tokenize(q.text));

  for (auto& sentence : pool) {
    sentence.matched_queries.clear();
    const auto stoks = tokenize(sentence.text);
    if (stoks.empty()) continue;
    for (int qi = 0; qi < static_cast<int>(queries.size()); ++qi) {
      if (query_tokens[static_cast<std::size_t>(qi)].empty()) continue;
      if (mean_recall(query_tokens[static_cast<std::size_t>(qi)], stoks, table) >
          threshold)
        sentence.matched_queries.push_back(qi);
    }
  }

  PoolMatches out;
  out.per_query.resize(queries.size());
  for (int qi = 0; qi < static_cast<int>(queries.size()); ++qi) {
    // Candidates in pool order; stable sort keeps insertion order on ties.
    std::vector<int> wiki, cnet;
    for (int idx = 0; idx < static_cast<int>(pool.size()); ++idx) {
      const auto& s = pool[static_cast<std::size_t>(idx)];
      if (s.matched_queries.size() < 2) continue;  // single-query sentences drop
      if (std::find(s.matched_queries.begin(), s.matched_queries.end(), qi) ==
          s.matched_queries.end())
        continue;
      (s.source == KnowledgeSource::Wikipedia ? wiki : cnet).push_back(idx);
    }
    auto take_top = [&](std::vector<int>& ids) {
      std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
        return pool[static_cast<std::size_t>(a)].match_score >
               pool[static_cast<std::size_t>(b)].match_score;
      });
      if (static_cast<int>(ids.size()) > max_per_query)
        ids.resize(static_cast<std::size_t>(max_per_query));
    };
    take_top(wiki);
    take_top(cnet);
    out.per_query[static_cast<std::size_t>(qi)].wikipedia = std::move(wiki);
    out.per_query[static_cast<std::size_t>(qi)].conceptnet = std::move(cnet);
  }
  out.pool = std::move(pool);
  return out;
}

std::vector<std::vector<VisualKnowledgeItem>> retrieve_visual(
    const std::vector<NounPhrase>& question_phrases,
    const std::vector<std::vector<LinkedObject>>& question_links,
    const std::vector<NounPhrase>& answer_phrases,
    const std::vector<Statement>& statements, KnowledgeClient& images,
    int max_objects, int max_images) {
  if (question_links.size() != question_phrases.size())
    throw UsageError("retrieve_visual: links not parallel to question phrases");
  if (statements.size() != answer_phrases.size())
    throw UsageError("retrieve_visual: statements not parallel to answer phrases");

  std::vector<std::vector<VisualKnowledgeItem>> out;
  out.reserve(question_phrases.size() + answer_phrases.size());

  for (std::size_t p = 0; p < question_phrases.size(); ++p) {
    std::vector<VisualKnowledgeItem> items;
    const auto& links = question_links[p];  // already sorted by linking score
    for (std::size_t i = 0; i < links.size() && static_cast<int>(i) < max_objects; ++i) {
      VisualKnowledgeItem item;
      item.kind = VisualKnowledgeItem::Kind::InternalObject;
      item.feature = links[i].object.feature;
      item.provenance = "object:" + std::to_string(links[i].object.object_id);
      items.push_back(std::move(item));
    }
    out.push_back(std::move(items));
  }

  for (std::size_t a = 0; a < answer_phrases.size(); ++a) {
    std::vector<VisualKnowledgeItem> items;
    try {
      const auto docs = images.fetch(statements[a].text);
      for (std::size_t i = 0; i < docs.size() && static_cast<int>(i) < max_images; ++i) {
        if (docs[i].object_features.empty()) continue;
        VisualKnowledgeItem item;
        item.kind = VisualKnowledgeItem::Kind::ExternalImage;
        Vec mean = Vec::Zero(docs[i].object_features.front().size());
        for (const Vec& f : docs[i].object_features) mean += f;
        item.feature = mean / static_cast<double>(docs[i].object_features.size());
        item.provenance = docs[i].id;
        items.push_back(std::move(item));
      }
    } catch (const ClientError& e) {
      log_warn("image retrieval for answer '" + answer_phrases[a].text +
               "' skipped: " + e.what());
      items.clear();
    }
    out.push_back(std::move(items));
  }
  return out;
}

}  // namespace kval
