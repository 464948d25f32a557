"""Versioned prompt templates for every adapter-facing step.

Each template starts with a stable ``[task: ...]`` tag so deterministic mock
adapters can dispatch on structure rather than wording; tests must never
depend on the prose of a template.
"""

PROMPT_VERSION = 1

GENERATED_QUESTIONS = """[task: store_generated_questions]
Write search-engine questions that would help verify the claim below.
One question per line.
Claim: {claim}
"""

BACKGROUND_QUERIES = """[task: store_background_queries]
Write search queries about background information for the entities in the
claim below. One query per line.
Claim: {claim}
"""

PROVENANCE_QUERIES = """[task: store_provenance_queries]
Write search queries that would establish the provenance of the claim below,
such as whether its source is a satire site. One query per line.
Claim: {claim}
"""

EXTRACT_ENTITIES = """[task: store_extract_entities]
List the named entities in the claim below, one per line.
Claim: {claim}
"""

GOLD_URL_QUESTIONS = """[task: store_gold_url_questions]
Write questions whose web search results would include this URL.
One question per line.
URL: {url}
"""

DIFFERENT_EVENT_SAME_ENTITY = """[task: store_different_event_same_entity]
Write search queries about different events that involve some of the same
entities as the claim below. One query per line.
Claim: {claim}
"""

SIMILAR_ENTITIES = """[task: store_similar_entities]
Rewrite the claim below as search queries in which key entities, dates, and
events are replaced with similar but different ones. One query per line.
Claim: {claim}
"""

REPHRASE = """[task: store_rephrase]
Rephrase the following text, keeping its meaning. Reply with the rephrased
text only.
Text: {text}
"""

QUESTION_GENERATION = """[task: pipeline_question_generation]
Produce five evidence-seeking questions for verifying the claim below,
numbered 1-5, one per line.
{examples}Claim: {claim}
Claim date: {claim_date}
"""

QUESTION_CLASSIFICATION = """[task: pipeline_question_classification]
Classify the question below into exactly one category, and reply with the
category name only:
- visual_qa: an image-related question answerable from visual cues alone
- image_rag: an image-related question requiring external knowledge
- text_rag: a purely textual question
- image_answer: a question whose answer should itself be an image
Claim: {claim}
Question: {question}
"""

VISUAL_QA = """[task: pipeline_visual_qa]
Answer the question using only the attached claim image(s).
Question: {question}
"""

RAG_ANSWER = """[task: pipeline_rag_answer]
Answer the question using the numbered evidence passages below. End your
reply with a line "SOURCE: <passage number>" naming the passage that best
supports the answer.
Question: {question}
{passages}
"""

IMAGE_SELECTION = """[task: pipeline_image_selection]
Two candidate images are attached. Reply with the number (1 or 2) of the
image that best answers the question.
Question: {question}
"""

VERDICT = """[task: pipeline_verdict]
Given the claim and all question-answer evidence below, choose one verdict:
- supported: the evidence supports the claim
- refuted: the evidence contradicts the claim
- not enough evidence: the evidence is insufficient either way
- conflicting/cherry-picking: the evidence conflicts or the claim cherry-picks
Reply with the verdict label only.
Claim: {claim}
{qas}
"""

JUSTIFICATION = """[task: pipeline_justification]
Explain in a short paragraph why the verdict below follows from the
question-answer evidence.
Claim: {claim}
Verdict: {verdict}
{qas}
"""
