public class Cipher {
    private char mKey;
    private String mText;

    public boolean valid() {
        System.out.println(mText);
        <start>return Character.isLetter(key);<end>
    }
}
