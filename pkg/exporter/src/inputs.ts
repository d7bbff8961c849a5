import { StoryDocument, GraphNode } from "./corpus.js";
import { buildLabelSentence, normalizeTokens, TASK_LABELS } from "./tokenize.js";

export const MAX_INPUT_TOKENS = 160;

export interface NodeInput {
  sentence: string[];
  context: string[];
  labelSentence: string[];
}

/**
 * Assemble the three-part node input: the node's sentence, the context (all
 * sentences its entity appears in, in order), and the label sentence listing
 * every candidate label of the task. The label sentence is never truncated;
 * the context is cut from the right first, then the sentence.
 */
export function assembleNodeInput(
  doc: StoryDocument,
  node: GraphNode,
  task: string | null,
  budget: number = MAX_INPUT_TOKENS,
): NodeInput {
  let sentence = doc.sentences[node.sentence].tokens.slice();
  const chain = doc.chains.find((c) => c.entity === node.entity);
  if (!chain) {
    throw new Error(`${doc.docId}: no chain for entity '${node.entity}'`);
  }
  const seen = new Set<number>();
  const ctxSentences: number[] = [];
  for (const [sent] of chain.mentions) {
    if (!seen.has(sent)) {
      seen.add(sent);
      ctxSentences.push(sent);
    }
  }
  ctxSentences.sort((a, b) => a - b);
  let context: string[] = [];
  for (const idx of ctxSentences) {
    context = context.concat(doc.sentences[idx].tokens);
  }
  let labelSentence: string[] = [];
  if (task && task !== "none") {
    const labels = TASK_LABELS[task];
    if (!labels) throw new Error(`unknown task '${task}'`);
    labelSentence = normalizeTokens(buildLabelSentence(node.entity, labels));
  }
  if (labelSentence.length >= budget) {
    throw new Error(`label sentence exceeds the ${budget}-token budget`);
  }
  const room = budget - labelSentence.length;
  if (sentence.length + context.length > room) {
    context = context.slice(0, Math.max(0, room - sentence.length));
    if (sentence.length + context.length > room) {
      sentence = sentence.slice(0, room);
    }
  }
  return { sentence, context, labelSentence };
}

export function totalTokens(input: NodeInput): number {
  return input.sentence.length + input.context.length + input.labelSentence.length;
}
