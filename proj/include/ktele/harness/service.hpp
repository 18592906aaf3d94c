#pragma once

#include <string>
#include <vector>

#include "ktele/anenc.hpp"
#include "ktele/backbone.hpp"
#include "ktele/ke.hpp"

namespace ktele::harness {

enum class ServiceFormat { only_name, entity_no_attr, entity_with_attr };

ServiceFormat service_format_from_string(const std::string& s);

struct ServiceVector {
  Vec vector;
  bool fell_back_to_name = false;  // entity format without a surface match
  prompting::WrappedSequence sequence;
};

// The service-delivery paradigm: wrap a downstream task's target name per the
// requested format and return the pooled [CLS] embedding.
ServiceVector encode_service_vector(
    const std::string& name, ServiceFormat format, const ke::KnowledgeGraph& kg,
    const backbone::Encoder& enc, const tokenizer::Vocabulary& vocab,
    const std::vector<std::pair<std::string, corpus::AttrValue>>& task_attributes = {},
    const corpus::NormalizationStats* stats = nullptr);

}  // namespace ktele::harness
