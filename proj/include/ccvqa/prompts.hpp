#pragma once

#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ccvqa::prompts {

enum class Template { parametric_context, question_rewrite, visual_rationale, conflict_analysis, final_answer };

// Template text exactly as shipped in data/prompts (compiled in at build time).
std::string_view text(Template t);
// Asset file stem, e.g. "visual_rationale".
std::string_view asset_name(Template t);
std::vector<Template> all_templates();

// Replaces each {Name} placeholder in one left-to-right pass; substituted
// values are never re-scanned. Unknown placeholders are left as they are.
std::string render(std::string_view tmpl, const std::map<std::string, std::string>& values);

std::string parametric_context(const std::string& question);
std::string question_rewrite(const std::string& question);
std::string visual_rationale(const std::string& question, const std::string& section);
std::string conflict_analysis(const std::string& question, const std::string& reasons_text);
std::string final_answer(const std::string& question, const std::string& features,
                         const std::string& retrieved_information);

// Splits the final-answer template around its two slots, so that the token
// stream of each region can be tagged separately.
struct FinalAnswerParts {
  std::string before_features;   // question already substituted
  std::string between;           // text between features and retrieved information
  std::string after;             // trailing "... Short Answer:"
};
FinalAnswerParts final_answer_parts(const std::string& question);

// Vanilla RAG prompt: the final-answer template without the feature clause.
struct VanillaParts {
  std::string before_information;
  std::string after;
};
VanillaParts vanilla_answer_parts(const std::string& question);

// Parametric-only prompt used for the query-only decoding pass.
std::string parametric_answer(const std::string& question);

}  // namespace ccvqa::prompts
