#pragma once

#include <cstdint>
#include <functional>
#include <utility>

#include "pevade/model/gbdt.hpp"
#include "pevade/util/bytes.hpp"

namespace pevade {

// Label-only detector interface. Callers see a single bit per file and the
// environment accounts for every query made.
class Blackbox {
 public:
  virtual ~Blackbox() = default;

  bool query(const ByteBuf& bytes) {
    ++queries_;
    return classify(bytes);
  }

  std::uint64_t query_count() const { return queries_; }

 protected:
  virtual bool classify(const ByteBuf& bytes) = 0;

 private:
  std::uint64_t queries_ = 0;
};

// Detector backed by a trained model; bytes that cannot be featurized are
// reported malicious.
class ModelBlackbox : public Blackbox {
 public:
  explicit ModelBlackbox(GbdtModel model) : model_(std::move(model)) {}
  const GbdtModel& model() const { return model_; }

 protected:
  bool classify(const ByteBuf& bytes) override;

 private:
  GbdtModel model_;
};

class CallbackBlackbox : public Blackbox {
 public:
  explicit CallbackBlackbox(std::function<bool(const ByteBuf&)> fn) : fn_(std::move(fn)) {}

 protected:
  bool classify(const ByteBuf& bytes) override { return fn_(bytes); }

 private:
  std::function<bool(const ByteBuf&)> fn_;
};

}  // namespace pevade
