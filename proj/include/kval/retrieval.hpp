#pragma once

#include "kval/clients.hpp"
#include "kval/phrases.hpp"
#include "kval/text.hpp"

#include <map>
#include <string>
#include <vector>

namespace kval {

/// Declarative form of a question-answer pair, used as the relevance anchor
/// for retrieval. Always contains the answer as a substring.
struct Statement {
  std::string text;
  QuestionId question_id = 0;
  std::string answer;
};

class StatementConverter {
 public:
  virtual ~StatementConverter() = default;
  virtual Statement convert(const std::string& question,
                            const std::string& answer) const = 0;
};

/// Rule-based fallback: substitutes the answer for the target phrase, with a
/// copula-inversion special case ("what is X?" -> "X is <answer>"). Answers
/// that already read as sentences pass through unchanged.
class RuleStatementConverter final : public StatementConverter {
 public:
  explicit RuleStatementConverter(const PhraseChunker& chunker) : chunker_(chunker) {}
  Statement convert(const std::string& question,
                    const std::string& answer) const override;

 private:
  const PhraseChunker& chunker_;
};

Statement qa_to_statement(const std::string& question, const std::string& answer,
                          const StatementConverter& converter);

struct RetrievedSentence {
  std::string text;
  KnowledgeSource source = KnowledgeSource::Wikipedia;
  SearchQuery origin_query;        // the query whose fetch produced it
  std::string article_id;
  double match_score = 0.0;        // max statement-similarity f1, clamped to [0,1]
  std::vector<int> matched_queries;  // query ordinals, populated by matching
};

/// Sentence splitter for article text: breaks on ./!/? and newlines.
std::vector<std::string> split_sentences(const std::string& text);

/// Rewrites a sentence to stand alone outside its paragraph. The default
/// implementation is a pass-through; a trained rewriter can be substituted.
class Decontextualizer {
 public:
  virtual ~Decontextualizer() = default;
  virtual std::string rewrite(const std::string& sentence,
                              const std::string& context) const = 0;
};

class PassthroughDecontextualizer final : public Decontextualizer {
 public:
  std::string rewrite(const std::string& sentence,
                      const std::string&) const override {
    return sentence;
  }
};

RetrievedSentence decontextualize(const RetrievedSentence& sentence,
                                  const std::string& context,
                                  const Decontextualizer& d);

struct TextualPool {
  std::vector<RetrievedSentence> sentences;

  // Per (source, article, statement) count of distinct pooled sentences;
  // lets downstream audits check the per-article cap.
  struct PushCount {
    KnowledgeSource source;
    std::string article_id;
    int statement_index;
    int count;
  };
  std::vector<PushCount> pushes;
};

/// Fetches every query against both textual sources and keeps, per
/// (statement, article), the `top_per_article` sentences by greedy-match f1
/// against the statement. Sentences are deduplicated per source by
/// normalized text, keeping the maximum score. Wikipedia sentences pass
/// through `decontext` (with the article text as context) when given.
/// A failing query contributes nothing and is logged.
TextualPool build_textual_pool(const std::vector<SearchQuery>& queries,
                               const std::vector<Statement>& statements,
                               KnowledgeClient& wikipedia,
                               KnowledgeClient& conceptnet,
                               const TokenEncoder& encoder,
                               int top_per_article = 15,
                               const Decontextualizer* decontext = nullptr);

struct PoolMatches {
  std::vector<RetrievedSentence> pool;  // matched_queries populated

  struct PerQuery {
    std::vector<int> wikipedia;   // indices into pool, best first
    std::vector<int> conceptnet;
  };
  std::vector<PerQuery> per_query;  // parallel to the query list
};

/// A sentence matches a query when the mean recall of the query tokens
/// against the sentence tokens is strictly above `threshold`. Sentences
/// matching exactly one query are dropped; survivors are assigned per query
/// and per source, keeping the top `max_per_query` by match_score with ties
/// resolved by pool insertion order.
PoolMatches match_pool_to_queries(std::vector<RetrievedSentence> pool,
                                  const std::vector<SearchQuery>& queries,
                                  const WordVectorTable& table,
                                  int max_per_query = 4,
                                  double threshold = 0.6);

struct VisualKnowledgeItem {
  enum class Kind { InternalObject, ExternalImage };
  Kind kind = Kind::InternalObject;
  Vec feature;             // object feature, or mean over the image's objects
  std::string provenance;  // object id or image descriptor path
};

/// Question phrases (target included) keep their top linked objects;
/// answer phrases retrieve external images with the answer's statement as
/// the query. Client failures yield an empty list for that phrase.
std::vector<std::vector<VisualKnowledgeItem>> retrieve_visual(
    const std::vector<NounPhrase>& question_phrases,
    const std::vector<std::vector<LinkedObject>>& question_links,
    const std::vector<NounPhrase>& answer_phrases,
    const std::vector<Statement>& statements, KnowledgeClient& images,
    int max_objects = 3, int max_images = 5);

}  // namespace kval
