// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0
//
// U-Net assembled on the autodiff tape. Every submodule has a stable
// colon-joined address; one forward pass records the ValueId of each module
// output so deep supervision and feature taps never recompute. Criterion
// bindings attach weighted, scheduled losses to those addresses.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "voxelpipe/config/node.hpp"
#include "voxelpipe/config/registry.hpp"
#include "voxelpipe/config/schema.hpp"
#include "voxelpipe/tensor/tape.hpp"
#include "voxelpipe/tensor/tensor.hpp"

namespace voxelpipe {

// Module tree node. Addresses are child names joined by ':' and resolve
// from the unnamed root, e.g. `UNetBlock_0:Head:Softmax`.
struct ModuleNode {
  std::string name;
  std::vector<ModuleNode> children;

  const ModuleNode* child(const std::string& n) const;
};

// nullptr when any segment is missing or the address is empty
const ModuleNode* find_node(const ModuleNode& root, const std::string& address);

// every descendant address, depth-first in declaration order
std::vector<std::string> list_addresses(const ModuleNode& root);

struct ConvBlockSpec {
  int64_t kernel_size = 3;
  int64_t stride = 1;  // must stay 1; the grid is preserved inside a stage
  int64_t padding = 1;
  bool bias = true;
  bool relu = true;
};

struct UNetSpec {
  std::vector<int64_t> channels;  // [input width, stage widths...]
  int64_t nb_class = 2;
  int64_t nb_conv_per_stage = 2;
  ConvBlockSpec block;
  double init_gain = 0.02;

  int64_t levels() const { return static_cast<int64_t>(channels.size()) - 1; }
};

// args: the bound UNet component mapping (registry Model/UNet signature);
// init_gain comes from the engine-level model keys
UNetSpec unet_spec_from_args(const ConfigNode& args, double init_gain = 0.02);

// Splits a validated Model mapping (`classpath` plus one component entry)
// into the component name, its registry-bound arguments, and the remaining
// engine keys (Optimizer, schedulers, outputs_criterions, ...).
struct ModelSection {
  std::string model_name;
  ConfigNode bound_args;
  ConfigNode engine;
};
ModelSection split_model_section(const ConfigNode& model_map,
                                 const Registry& reg);

// address tree only; stage i holds DownConvBlock (+ Downsample, Upsample,
// UpConvBlock when a deeper stage exists), stage 0 additionally the Head
// with derived Softmax and Argmax outputs
ModuleNode build_unet(const UNetSpec& spec);

struct Parameter {
  std::string name;  // module address plus ':weight' or ':bias'
  Tensor value;      // f32
};

class UNetModel {
 public:
  // weights ~ normal(0, init_gain), biases zero, drawn from a single
  // seeded stream in tree order so initialization is reproducible
  UNetModel(UNetSpec spec, uint64_t seed);

  const UNetSpec& spec() const { return spec_; }
  const ModuleNode& tree() const { return root_; }

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  Parameter* find_parameter(const std::string& name);

  // leaves every parameter onto the tape; index aligns with parameters()
  std::vector<ValueId> lift_parameters(Tape& tape, bool requires_grad) const;

  // input [B, channels[0], H, W] with H and W divisible by 2^(levels-1);
  // param_ids must come from lift_parameters on the same tape; returns the
  // output ValueId of every module address
  std::map<std::string, ValueId> forward(
      Tape& tape, ValueId input, const std::vector<ValueId>& param_ids) const;

  // single gradient-free pass; only the requested addresses are returned,
  // duplicates collapse, unknown addresses raise a Graph error
  std::map<std::string, Tensor> forward_collect(
      const Tensor& input, const std::vector<std::string>& addresses) const;

 private:
  // geometry and parameter indices of one parameterized module
  struct ConvRef {
    size_t weight = 0;
    int64_t bias = -1;  // index into params_, -1 when absent
    int64_t stride = 1;
    int64_t pad = 0;
    bool relu = false;
    bool transpose = false;
  };

  ValueId run_conv(Tape& tape, const std::string& address, ValueId x,
                   const std::vector<ValueId>& param_ids) const;

  UNetSpec spec_;
  ModuleNode root_;
  std::vector<Parameter> params_;
  std::map<std::string, ConvRef> convs_;
};

// one threshold of a loss-weight schedule
struct ScheduleEntry {
  int64_t nb_step = 0;
  double value = 1.0;
};

// active entry: largest nb_step <= step; an empty schedule means weight 1,
// steps before the first threshold get weight 0
double schedule_weight(const std::vector<ScheduleEntry>& schedule,
                       int64_t step);

struct CriterionBinding {
  std::string output_address;               // model tap the criterion reads
  std::string group_key;                    // target key as written
  std::vector<std::string> target_groups;   // group_key split on ';'
  std::string criterion;                    // registered Loss component name
  std::string label;                        // loader key as written
  ConfigNode args;                          // bound criterion arguments
  bool is_loss = true;
  std::vector<ScheduleEntry> schedule;

  std::string id() const;  // `<address>|<group_key>|<label>`
};

// outputs_criterions: the validated mapping address -> targets_criterions;
// path prefixes error locations
std::vector<CriterionBinding> bindings_from_config(
    const ConfigNode& outputs_criterions, const Registry& reg,
    const std::string& path);

struct BindingValue {
  std::string id;
  double value = 0.0;   // raw criterion value at this step
  double weight = 0.0;  // schedule weight applied to it
  bool is_loss = true;
};

struct LossReport {
  ValueId total = -1;  // scalar tape node; a zero leaf when nothing trains
  double total_value = 0.0;
  std::vector<BindingValue> values;
};

// total = sum over is_loss bindings of weight(step) * criterion; tracking
// bindings evaluate but stay out of the total
LossReport compute_losses(Tape& tape,
                          const std::vector<CriterionBinding>& bindings,
                          const std::map<std::string, ValueId>& outputs,
                          const std::map<std::string, Tensor>& targets,
                          int64_t step);

// Diagnostics for references the schema cannot see: criterion and output
// addresses that do not resolve in the model tree, target groups absent
// from the dataset section, an input width incompatible with extend_slice,
// and focal alpha vectors longer than nb_class. Empty means consistent.
std::vector<std::string> validate_cross_refs(const ConfigDocument& cfg,
                                             const ModuleNode& model_tree);

}  // namespace voxelpipe
