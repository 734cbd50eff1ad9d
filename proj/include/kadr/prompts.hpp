#pragma once

#include <string_view>

// Prompt templates and their worked demonstrations. Placeholders use the
// {name} form and are filled by text::render. Spelling inside the templates
// is kept exactly as the prompts were used in practice.

namespace kadr::prompts {

inline constexpr std::string_view answer_system =
    R"kadr(You are a helpful assistant.
You are given a question and a list of documents.
You need to answer the question based on the documents.
Please answer the question concisely, with no more than 200 words.)kadr";

inline constexpr std::string_view answer_user = "Question: {question}\nContext: {documents}";

inline constexpr std::string_view declaration_system =
    R"kadr(Please first analyze the given problem and determine which knowledge elements are required to answer the given problem.
Please first think step by step and then output in numbered list (no more than 4 points).
Then analyze which knowledge points are provided in the given document from these required knowledge elements.
Please first think step by step and then output the number of knowlege elements (if no knowledge elements are provided, output None).

**Example output format:**
Thoughts knowlege requirements:
<your thoughts here>

Knowledge Elements:
<numbered list>

Analysis for given document:
<compare and analyse document and above knowledge point by point>

Given Knowledge:
<selected numbers>

Example Input:
{demo_input}
Example Output:
{demo_output})kadr";

inline constexpr std::string_view declaration_user = "Question: {question}\nDocument: {document}";

inline constexpr std::string_view declaration_demo_input =
    R"kadr(Question: What are the key differences between getting lost in the backcountry and being stranded without man-made resources in terms of the survival skills required to handle each situation?

Document: Bushcraft’ is a word that gets thrown around very often in the survival community, but it’s also a word that far fewer people understand it. A truly skilled survivalist is someone who can use resources provided by nature exclusively to survive. Ask yourself this: if you were stranded out in the wilderness tomorrow with nothing but the clothes on your back and could only use completely natural resources to survive, would you be able to? If your honest answer is no, then you will probably find the information presented in this article useful. We are going to provide you with a definitive list of bushcraft skills that will allow you to survive in the wilderness using no man-made materials whatsoever. THE BOW DRILL METHOD Everyone knows how important fire is in any survival situation. But not everyone is capable of starting a fire without a flint striker, lighter, or matches. It’s imperative that you learn a way to start a fire without any of those kinds of fire starting devices. The best method for starting a fire without any man-made materials is the bow drill method. This method requires you to collect a flat piece of wood (to serve as the fireboard) with a notch cut into it. You also need a bow complete with a vine for the cord, and a sharpened stick as the spindle. Wrap the vine around the spindle and place the point of the spindle right above where the notch is in the fireboard. Proceed to run the bow back and forth very quickly and over an extended period, friction and heat build between the spindle and board. The small shavings of wood will then fall into the notch. Have a tinder nest already made and different sized kindling on standby. Once you get an ember or smoke, you can transfer the ember into the tinder next to get your fire started. Proceed to add kindling, and you’ll have a fire going. The bow drill method may sound simple enough on paper, but it’s going to be more physically taxing in real life. You never want a true survival situation to be the first time you practice the bow drill method of fire starting. For this reason, practice extensively now on weekends or whenever you have the time until you become a master at it. That way, it will seem virtually second nature to you in a life-or-death situation. The skill of tying together two strips of vine or other man-made materials is one that you will not only use in a survival situation but throughout your life as well)kadr";

inline constexpr std::string_view declaration_demo_output =
    R"kadr(Thoughts knowledge requirements:
To answer the question about the key differences between getting lost in the backcountry and being stranded without man-made resources, we need to understand the specific survival skills required for each scenario. Getting lost in the backcountry might involve using some man-made resources (e.g., a map, compass, or gear), while being stranded without man-made resources requires pure bushcraft skills (e.g., fire-starting, shelter-building, foraging). The document focuses on bushcraft skills, which are more relevant to the latter scenario.

Knowledge Elements:
1. Understanding the definition and scope of bushcraft (survival using only natural resources).
2. Fire-starting techniques without man-made tools (e.g., bow drill method).
3. The importance of practicing bushcraft skills before a survival situation.
4. General survival skills like tying materials (though not explicitly detailed for shelter or foraging).

Analysis for given document:
The document primarily discusses bushcraft skills, emphasizing fire-starting without man-made tools (bow drill method) and the need for practice. It does not explicitly contrast backcountry survival (with potential man-made resources) vs. stranded survival (without man-made resources), but it provides insights into the latter. The document covers points 1, 2, and 3 but does not delve into broader survival skill comparisons (e.g., navigation, shelter-building for backcountry vs. bushcraft).

Given Knowledge:
1, 2, 3)kadr";

inline constexpr std::string_view summarization_system =
    R"kadr(You have identified the knowledge elements required to answer the given question based on the provided question and the retrieved relevant documents.
Please select two of the most important, complete, and non-redundant knowledge elements from the identified knowledge elements for further retrieving the knowledge base to answer the given question.
Please think step by step first, and finally output the result in the format of a Python list.

**Example Output Format:**
Thoughts:
<your thoughts here>

Selected Knowledge Elements:
```json
[
    "Knowledge Element 1",
    "Knowledge Element 2"
]
```

## Examples:
**Example Input:**
{demo_input}

**Example Output:**
{demo_output})kadr";

inline constexpr std::string_view summarization_user = "Question: {question}\nKnowledge Elements:\n```\n{knowledge_elements}\n```";

inline constexpr std::string_view summarization_demo_input =
    R"kadr(Question: How has the understanding of decision-making and choice abundance evolved from Barry Schwartz's early research on the jam experiment to more recent psychological approaches like the U-Theory?

Knowledge Elements:
```
Barry Schwartz's jam experiment and its findings on choice and decision-making.
The adverse effects of choice abundance, including analysis paralysis, buyer's remorse, and decision fatigue.
The U-Theory and its relevance to understanding decision-making in the context of choice abundance.
The impact of choice abundance on consumer behavior, conversions, retention, and revenue.
Barry Schwartz's jam experiment and its implications for decision-making.
The concept of choice overload and its effects on decision-making.
The role of cognitive limits in decision-making (e.g., George Miller's "magical number seven").
The impact of information quantity on purchasing decisions (Iyengar and Lepper's research).
Barry Schwartz's jam experiment and its impact on understanding choice overload.
The concept of choice abundance and its psychological effects.
The evolution of psychological theories on decision-making.
Introduction to U-Theory and its application in understanding decision-making.
Barry Schwartz's jam experiment and its findings on decision-making paralysis.
The concept of choice abundance and its effects on consumer behavior.
U-Theory's approach to decision-making, emphasizing the balance between too few and too many options.
Evolution of psychological theories on decision-making from Schwartz's early work to U-Theory.
Barry Schwartz's jam experiment and its findings on decision-making paralysis.
The concept of choice abundance and its effects on consumer behavior.
U-Theory's perspective on decision-making and its differences from Schwartz's early work.
Evolution of psychological approaches to decision-making and choice abundance.
```)kadr";

inline constexpr std::string_view summarization_demo_output =
    R"kadr(Thoughts:
The question asks about the evolution from Barry Schwartz's jam experiment to U-Theory. The most critical points are the foundational findings of the jam experiment (highlighting choice overload) and U-Theory's modern approach to balancing choice abundance. These directly address the "evolution" in understanding, avoiding redundancy with other supporting concepts like cognitive limits or consumer behavior impacts.

Selected Knowledge Elements:
```json
[
    "Barry Schwartz's jam experiment and its findings on decision-making paralysis.",
    "U-Theory's approach to decision-making, emphasizing the balance between too few and too many options."
]
```)kadr";

inline constexpr std::string_view judge_system =
    R"kadr(You are an QA evaluation assistant.
Your task is assess the quality of the answer provided by the model base on metrics **Relevance** and **Faithfulness**.
You are given a question, one or two reference documents, the ground truth answer and the model's output.

Please first evaluate the relevance of the output with respect to the question and the ground truth answer.
And then evaluate the faithfulness of the output with respect to the documents.

The definition of **Relevance** score is as follows:
Combines elements of equivalence (semantic match with ground truth) and relevance (degree to which the answer directly addresses the question).
Graded on a four-point scale:
2: Correct and relevant (no irrelevant information).
1: Correct but contains irrelevant information.
0: No answer provided (abstention).
-1: Incorrect answer.

The definition of **Faithfulness** score is as follows:
Assesses whether the response is grounded in the retrieved passages.
Graded on a three-point scale:
1: Full support. All answer parts are grounded.
0: Partial support. Not all answer parts are grounded.
-1: No support. All answer parts are not grounded.

Please first think step by step and then output your evaluation scores in a json format.
Example output format:
<your thoughts here>
```json
{
    "relevance": <your assessment of relevance>,
    "faithfulness": <your assessment of faithfulness>
}
```)kadr";

inline constexpr std::string_view judge_user =
    "**Question:** {question}\n**Ground Truth Answer:** {answer}\n**Reference Documents:** {gold_context}\n**Model's Output:** {output}";

}  // namespace kadr::prompts
