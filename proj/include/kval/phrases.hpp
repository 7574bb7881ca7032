#pragma once

#include "kval/chunker.hpp"
#include "kval/text.hpp"
#include "kval/types.hpp"

#include <array>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace kval {

enum class PhraseKind { Target, Question, Answer };

struct NounPhrase {
  std::string text;           // joined lowercase tokens
  PhraseKind kind = PhraseKind::Question;
  int span_begin = 0;         // token ordinals in the source text
  int span_end = 0;
  std::string head;           // last noun of the base run
  int index = 0;              // target 0, question phrases 1..N, answers by candidate
  bool degenerate = false;    // question had no wh/how word
};

struct ExtractedPhrases {
  NounPhrase target;
  std::vector<NounPhrase> question_phrases;
  std::vector<NounPhrase> answer_phrases;  // one per answer candidate, in order
};

/// Target, question and answer noun phrases via the supplied chunker.
/// A question with no wh/how word yields the whole question as a
/// degenerate target.
ExtractedPhrases extract_noun_phrases(const std::string& question,
                                      const std::vector<std::string>& answers,
                                      const PhraseChunker& chunker);

struct DetectedObject {
  int object_id = 0;
  std::string label;
  std::vector<std::string> attributes;
  Vec feature;
  std::array<double, 4> box{0, 0, 0, 0};  // normalized corners
};

struct ImageObjects {
  std::string image_id;
  std::vector<DetectedObject> objects;
};

/// Parses `{image_id, objects: [{object_id, label, attributes, box, feature}]}`.
/// Boxes outside [0,1] or inconsistent feature dimensions raise DataError.
ImageObjects load_image_objects(const std::filesystem::path& file);

/// Scores how likely a phrase refers to each detected object, in [0, 1].
class ObjectLinker {
 public:
  virtual ~ObjectLinker() = default;
  virtual std::vector<double> score(const NounPhrase& phrase,
                                    const std::vector<DetectedObject>& objects) const = 0;
};

/// Deterministic stand-in for a trained linker: mean recall of the phrase
/// head against the object's label and attribute tokens, clamped to [0, 1].
class TokenOverlapLinker final : public ObjectLinker {
 public:
  explicit TokenOverlapLinker(const WordVectorTable& table) : table_(table) {}
  std::vector<double> score(const NounPhrase& phrase,
                            const std::vector<DetectedObject>& objects) const override;

 private:
  const WordVectorTable& table_;
};

struct LinkedObject {
  DetectedObject object;
  double score = 0.0;
};

/// Objects with linking score strictly above `threshold` (default 0.5),
/// sorted by descending score; ties broken by ascending object_id.
std::vector<LinkedObject> link_phrase(const NounPhrase& phrase,
                                      const std::vector<DetectedObject>& objects,
                                      const ObjectLinker& linker,
                                      double threshold = 0.5);

struct SearchQuery {
  std::string text;
  int phrase_id = 0;  // ordinal of the phrase within its QueryPlan
  int rank = 1;       // 1..k_max
};

/// Query 1 is the phrase head; the rest prepend one distinct attribute of the
/// linked objects per query, in linker-score order, truncated to k_max.
std::vector<SearchQuery> generate_queries(const NounPhrase& phrase, int phrase_id,
                                          const std::vector<LinkedObject>& linked,
                                          int k_max);

}  // namespace kval
