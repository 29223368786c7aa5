"""Verbatim protocol messages used as fidelity fixtures."""

TRAINING_REQUEST = "(agentsToBeTrained (agents (set (agent :name agent1 :type locationAgent))))"
LOAD_CLASS = "(loadClass (behaviors (set (behavior :classname Class1) (behavior :classname Class2))))"
RULE_6 = "(defrule rule_6 (and (ozone normal)) => (store ALARM_TYPE 3))"
RULE_5 = "(defrule rule_5 (and (NO₂NO₃ normal)) => (store ALARM_TYPE 2))"
ADD_RULE = (
    '(addRule (jessRules (set (jessRule :rule "(defrule rule_6 (and (ozone normal)) => (store ALARM_TYPE 3))")'
    ' (jessRule :rule "(defrule rule_5 (and (NO₂NO₃ normal)) => (store ALARM_TYPE 2))"))))'
)
ONTOLOGY_QUERY = "(ontologyQuery (map :MessageOntology O3RTAAEnglish :MyOntology O3RTAATurkish :term pressure))"
# typographic quotes in the source rendering are plain double quotes on the wire
MAPPING = '(Mapping (From :term "pressure") (To :term "basinc"))'

ALL = [TRAINING_REQUEST, LOAD_CLASS, ADD_RULE, ONTOLOGY_QUERY, MAPPING]
