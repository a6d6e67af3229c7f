from .confidence import (concat_ranked, path_attention, path_embedding, rule_confidence, score_rules,
                         select_top_rules, split_by_head)
from .mining import MiningConfig, enumerate_cycles, mine_candidate_rules
from .rules import Rule, RuleSet, read_rules_tsv, write_rules_tsv

__all__ = ["Rule", "RuleSet", "MiningConfig", "mine_candidate_rules", "enumerate_cycles",
           "path_embedding", "path_attention", "rule_confidence", "score_rules", "select_top_rules",
           "concat_ranked", "split_by_head", "read_rules_tsv", "write_rules_tsv"]
